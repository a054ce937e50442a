#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "swarmtrack/metrics.hpp"
#include "swarmtrack/scenario.hpp"
#include "swarmtrack/simulation.hpp"

namespace swarmtrack {

struct ExperimentResult {
  PolicyKind policy = PolicyKind::base;
  std::vector<TrialResult> trials;  // ordered by trial index

  std::vector<std::vector<double>> ospa_curves() const {
    std::vector<std::vector<double>> out;
    for (const auto& t : trials) out.push_back(t.ospa);
    return out;
  }
};

/// Trial t runs with seed base_seed + t. Trials are farmed out to `workers`
/// threads; results are stored by trial index so output order never depends
/// on scheduling.
inline ExperimentResult run_experiment(const ScenarioConfig& config, PolicyKind policy, unsigned workers = 1) {
  const auto n = static_cast<std::size_t>(config.experiment.trials);
  ExperimentResult res;
  res.policy = policy;
  res.trials.resize(n);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t t = next++; t < n; t = next++) {
      try {
        res.trials[t] = run_trial(config, policy, config.experiment.base_seed + t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < workers; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return res;
}

/// Paired comparison: every policy sees the same per-trial seeds.
inline std::vector<ExperimentResult> run_comparison(const ScenarioConfig& config,
                                                    const std::vector<PolicyKind>& policies, unsigned workers = 1) {
  std::vector<ExperimentResult> out;
  for (const auto p : policies) out.push_back(run_experiment(config, p, workers));
  return out;
}

// ---------------------------------------------------------------------------
// Result files

/// Shortest round-trip decimal form; locale independent.
inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string raw_csv(const std::vector<ExperimentResult>& results) {
  std::ostringstream os;
  os << "trial,epoch,ospa,phi,policy\r\n";
  for (const auto& r : results)
    for (std::size_t t = 0; t < r.trials.size(); ++t)
      for (std::size_t e = 0; e < r.trials[t].ospa.size(); ++e)
        os << t << ',' << e << ',' << format_number(r.trials[t].ospa[e]) << ','
           << format_number(r.trials[t].phi[e]) << ',' << to_string(r.policy) << "\r\n";
  return os.str();
}

inline std::string summary_csv(const std::vector<ExperimentResult>& results) {
  std::ostringstream os;
  os << "epoch,mean,ci_low,ci_high,policy\r\n";
  for (const auto& r : results) {
    const auto s = summarize(r.ospa_curves());
    for (std::size_t e = 0; e < s.size(); ++e)
      os << e << ',' << format_number(s[e].mean) << ',' << format_number(s[e].ci_low) << ','
         << format_number(s[e].ci_high) << ',' << to_string(r.policy) << "\r\n";
  }
  return os.str();
}

/// Mean OSPA curve per policy with a shaded 95% band (band omitted for a
/// single trial).
inline std::string summary_svg(const std::vector<ExperimentResult>& results, double ospa_cutoff) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  const double W = 720, H = 420, left = 60, right = 160, top = 30, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  std::size_t epochs = 1;
  for (const auto& r : results)
    if (!r.trials.empty()) epochs = std::max(epochs, r.trials.front().ospa.size());
  const double ymax = ospa_cutoff;
  auto X = [&](std::size_t e) { return left + pw * (epochs > 1 ? double(e) / double(epochs - 1) : 0.0); };
  auto Y = [&](double v) { return top + ph * (1.0 - std::clamp(v, 0.0, ymax) / ymax); };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">epoch</text>\n";
  os << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
     << top + ph / 2 << ")\">OSPA (m)</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << Y(v) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
       << format_number(v) << "</text>\n";
  }
  for (std::size_t p = 0; p < results.size(); ++p) {
    const auto& r = results[p];
    if (r.trials.empty()) continue;
    const char* color = palette[p % 6];
    std::vector<double> mean;
    std::vector<EpochSummary> s;
    if (r.trials.size() >= 2) {
      s = summarize(r.ospa_curves());
      for (const auto& e : s) mean.push_back(e.mean);
    } else {
      mean = r.trials.front().ospa;
    }
    if (!s.empty()) {
      os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
      for (std::size_t e = 0; e < s.size(); ++e) os << X(e) << ',' << Y(s[e].ci_high) << ' ';
      for (std::size_t e = s.size(); e-- > 0;) os << X(e) << ',' << Y(s[e].ci_low) << ' ';
      os << "\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t e = 0; e < mean.size(); ++e) os << X(e) << ',' << Y(mean[e]) << ' ';
    os << "\"/>\n";
    const double ly = top + 18.0 * static_cast<double>(p);
    os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 36 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << to_string(r.policy)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline nlohmann::json run_meta(const std::vector<ExperimentResult>& results, const ScenarioConfig& config) {
  nlohmann::json j;
  j["config"] = to_json(config);
  j["trial_seeds"] = nlohmann::json::array();
  for (int t = 0; t < config.experiment.trials; ++t) j["trial_seeds"].push_back(config.experiment.base_seed + t);
  j["policies"] = nlohmann::json::array();
  for (const auto& r : results) {
    std::size_t decisions = 0, evals = 0, dim = 0;
    TrackerDiagnostics diag;
    double wall = 0.0;
    for (const auto& t : r.trials) {
      decisions += t.epochs.size();
      evals += t.de_evaluations;
      diag += t.diagnostics;
      wall += t.wall_seconds;
      for (const auto& e : t.epochs) dim = std::max(dim, e.search_dimension);
    }
    nlohmann::json p;
    p["policy"] = to_string(r.policy);
    p["trials"] = r.trials.size();
    p["decisions"] = decisions;
    p["de_evaluations_total"] = evals;
    p["de_evaluations_per_decision"] = decisions ? double(evals) / double(decisions) : 0.0;
    p["search_dimension"] = dim;
    p["diagnostics"] = {{"gate_singular", diag.gate_singular},
                        {"jpda_fallbacks", diag.jpda_fallbacks},
                        {"tracks_spawned", diag.tracks_spawned},
                        {"tracks_confirmed", diag.tracks_confirmed},
                        {"tracks_deleted", diag.tracks_deleted}};
    p["wall_seconds"] = wall;
    j["policies"].push_back(p);
  }
  return j;
}

/// Writes ospa_raw.csv, ospa_summary.csv (when every policy has >= 2
/// trials), summary.svg and run_meta.json into `out_dir`.
inline void emit_results(const std::vector<ExperimentResult>& results, const ScenarioConfig& config,
                         const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  write_file(out_dir / "ospa_raw.csv", raw_csv(results));
  const bool summarizable =
      std::all_of(results.begin(), results.end(), [](const ExperimentResult& r) { return r.trials.size() >= 2; });
  if (summarizable) write_file(out_dir / "ospa_summary.csv", summary_csv(results));
  write_file(out_dir / "summary.svg", summary_svg(results, config.ospa.params.c));
  write_file(out_dir / "run_meta.json", run_meta(results, config).dump(2) + "\n");
}

}  // namespace swarmtrack
