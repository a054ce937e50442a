#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "swarmtrack/sensing.hpp"
#include "swarmtrack/tracking.hpp"
#include "swarmtrack/types.hpp"

namespace swarmtrack {

/// Undirected communication graph; edge iff agents are within d_c.
struct ProximityGraph {
  std::size_t n = 0;
  std::vector<char> adjacency;  // row-major n x n
  std::vector<std::size_t> degrees;

  bool adjacent(std::size_t i, std::size_t j) const { return adjacency[i * n + j] != 0; }

  std::vector<std::size_t> neighbors(std::size_t i) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j)
      if (adjacent(i, j)) out.push_back(j);
    return out;
  }

  /// Connected-component id per vertex, numbered by lowest member.
  std::vector<std::size_t> components() const {
    std::vector<std::size_t> comp(n, n);
    for (std::size_t s = 0; s < n; ++s) {
      if (comp[s] != n) continue;
      std::vector<std::size_t> stack{s};
      comp[s] = s;
      while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        for (std::size_t w = 0; w < n; ++w)
          if (adjacent(v, w) && comp[w] == n) {
            comp[w] = s;
            stack.push_back(w);
          }
      }
    }
    return comp;
  }

  bool connected() const {
    const auto c = components();
    return std::all_of(c.begin(), c.end(), [](std::size_t x) { return x == 0; });
  }
};

inline ProximityGraph build_graph(const std::vector<AgentState>& agents, double d_c) {
  ProximityGraph g;
  g.n = agents.size();
  g.adjacency.assign(g.n * g.n, 0);
  g.degrees.assign(g.n, 0);
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = i + 1; j < g.n; ++j)
      if ((agents[i].pos - agents[j].pos).norm() <= d_c) {
        g.adjacency[i * g.n + j] = g.adjacency[j * g.n + i] = 1;
        ++g.degrees[i];
        ++g.degrees[j];
      }
  return g;
}

/// Cross-agent track identity: which local tracks describe the same target.
struct Correspondence {
  struct Member {
    std::size_t agent = 0;
    int track_id = 0;
  };
  std::vector<std::vector<Member>> clusters;       // indexed by global label
  std::vector<std::map<int, int>> local_to_global;  // per agent
  std::vector<Vec2> centroids;

  std::size_t num_labels() const { return clusters.size(); }
};

/// Greedy centroid clustering of track position means, agent by agent.
/// Within one agent, candidate (track, cluster) pairs are taken nearest-first
/// so each agent lands at most one track per cluster.
inline Correspondence associate_tracks(const std::vector<std::vector<Track>>& per_agent, double gate) {
  Correspondence c;
  c.local_to_global.resize(per_agent.size());
  std::vector<std::vector<Vec2>> member_pos;
  for (std::size_t a = 0; a < per_agent.size(); ++a) {
    const auto& tracks = per_agent[a];
    struct Cand {
      double d;
      std::size_t t;
      std::size_t k;
    };
    std::vector<Cand> cands;
    for (std::size_t t = 0; t < tracks.size(); ++t)
      for (std::size_t k = 0; k < c.clusters.size(); ++k) {
        const double d = (tracks[t].position() - c.centroids[k]).norm();
        if (d <= gate) cands.push_back({d, t, k});
      }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.d < y.d; });
    std::vector<char> track_done(tracks.size(), 0);
    std::vector<char> cluster_taken(c.clusters.size(), 0);
    for (const auto& cd : cands) {
      if (track_done[cd.t] || cluster_taken[cd.k]) continue;
      track_done[cd.t] = cluster_taken[cd.k] = 1;
      c.clusters[cd.k].push_back({a, tracks[cd.t].track_id});
      c.local_to_global[a][tracks[cd.t].track_id] = static_cast<int>(cd.k);
      member_pos[cd.k].push_back(tracks[cd.t].position());
    }
    const std::size_t existing = c.clusters.size();
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (track_done[t]) continue;
      c.local_to_global[a][tracks[t].track_id] = static_cast<int>(c.clusters.size());
      c.clusters.push_back({{a, tracks[t].track_id}});
      member_pos.push_back({tracks[t].position()});
      c.centroids.push_back(tracks[t].position());
    }
    for (std::size_t k = 0; k < existing; ++k) {
      if (!cluster_taken[k]) continue;
      Vec2 sum = Vec2::Zero();
      for (const auto& p : member_pos[k]) sum += p;
      c.centroids[k] = sum / static_cast<double>(member_pos[k].size());
    }
  }
  return c;
}

/// One synchronous averaging round over a single label:
/// x_i <- (1 / (1 + d(i))) * sum over {i} and its neighbours.
inline std::vector<InfoForm> consensus_step(const ProximityGraph& graph, const std::vector<InfoForm>& info) {
  if (info.size() != graph.n) throw std::invalid_argument("consensus_step: one InfoForm per agent required");
  std::vector<InfoForm> next(graph.n);
  for (std::size_t i = 0; i < graph.n; ++i) {
    InfoForm acc = info[i];
    for (std::size_t j = 0; j < graph.n; ++j)
      if (graph.adjacent(i, j)) {
        acc.omega += info[j].omega;
        acc.q += info[j].q;
      }
    const double w = 1.0 / (1.0 + static_cast<double>(graph.degrees[i]));
    next[i].omega = w * acc.omega;
    next[i].q = w * acc.q;
  }
  return next;
}

/// Information held for every global label by every agent.
/// `holds[label][i]` is false when agent i's component never saw the label;
/// those entries carry the vacuous prior and are not reported as tracks.
struct FusedTrackSet {
  std::vector<std::vector<InfoForm>> info;  // [label][agent]
  std::vector<std::vector<char>> holds;     // [label][agent]
  Correspondence correspondence;

  std::size_t num_labels() const { return info.size(); }

  struct Entry {
    int label;
    InfoForm info;
  };
  std::vector<Entry> for_agent(std::size_t agent) const {
    std::vector<Entry> out;
    for (std::size_t l = 0; l < info.size(); ++l)
      if (holds[l][agent]) out.push_back({static_cast<int>(l), info[l][agent]});
    return out;
  }
};

constexpr double kVacuousInformation = 1e-6;

/// Seed a fused set from local tracks: members contribute their own
/// information, everyone else the vacuous prior eps*I, q = 0.
inline FusedTrackSet seed_fused_set(const std::vector<std::vector<Track>>& per_agent,
                                    const Correspondence& corr, const ProximityGraph& graph,
                                    double vacuous = kVacuousInformation) {
  const std::size_t n = per_agent.size();
  FusedTrackSet fs;
  fs.correspondence = corr;
  fs.info.assign(corr.num_labels(), std::vector<InfoForm>(n));
  fs.holds.assign(corr.num_labels(), std::vector<char>(n, 0));
  const auto comp = graph.components();
  for (std::size_t l = 0; l < corr.num_labels(); ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      fs.info[l][i].omega = vacuous * Mat4::Identity();
      fs.info[l][i].q.setZero();
    }
    for (const auto& m : corr.clusters[l]) {
      const auto it = std::find_if(per_agent[m.agent].begin(), per_agent[m.agent].end(),
                                   [&](const Track& t) { return t.track_id == m.track_id; });
      fs.info[l][m.agent] = to_info_form(*it);
      for (std::size_t i = 0; i < n; ++i)
        if (comp[i] == comp[m.agent]) fs.holds[l][i] = 1;
    }
  }
  return fs;
}

inline FusedTrackSet run_consensus(const ProximityGraph& graph, FusedTrackSet fused, int L) {
  if (L < 1) throw std::invalid_argument("run_consensus: L must be >= 1");
  for (auto& per_label : fused.info)
    for (int l = 0; l < L; ++l) per_label = consensus_step(graph, per_label);
  return fused;
}

/// Sum of information-matrix traces over an agent's fused tracks.
inline double info_utility(const std::vector<FusedTrackSet::Entry>& agent_fused) {
  double phi = 0.0;
  for (const auto& e : agent_fused) phi += e.info.omega.trace();
  return phi;
}

inline double info_utility(const std::vector<InfoForm>& infos) {
  double phi = 0.0;
  for (const auto& e : infos) phi += e.omega.trace();
  return phi;
}

}  // namespace swarmtrack
