#pragma once
// Serialization: CSV (17 significant digits, '.' decimal separator) and JSON
// documents that embed the generating SystemParams for provenance, plus the
// run manifest listing every emitted file with its content hash.

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "polsqz/hash.hpp"
#include "polsqz/scans.hpp"
#include "polsqz/spectrum.hpp"
#include "polsqz/stokes.hpp"
#include "polsqz/version.hpp"

namespace polsqz {

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline nlohmann::json params_json(const SystemParams& p) {
  nlohmann::json j{{"gamma_perp", p.gamma_perp},
                   {"gamma_par", p.gamma_par},
                   {"delta", p.delta},
                   {"n_atoms", p.n_atoms},
                   {"cavity_T", p.cavity_T},
                   {"kappa_over_gamma", p.kappa_over_gamma},
                   {"delta_c", p.delta_c},
                   {"s_max", p.s_max}};
  if (p.g2_hz) j["g2_hz"] = *p.g2_hz;
  if (p.gamma_hz) j["gamma_hz"] = *p.gamma_hz;
  return j;
}

inline std::string params_hash(const SystemParams& p) {
  return sha256_hex(params_json(p).dump());
}

inline int stability_flag(Stability s) {
  switch (s) {
    case Stability::stable: return 1;
    case Stability::unstable: return 0;
    default: return -1;
  }
}

// --- branch curves -----------------------------------------------------------

inline std::string branch_curve_csv(const std::vector<const BranchCurve*>& curves) {
  std::string out = "param,branch_id,s_plus,s_minus,S,x_sr,stable\n";
  for (const BranchCurve* c : curves) {
    for (const auto& s : c->samples) {
      out += fmt_g17(s.param);
      out += ',';
      out += to_string(s.branch);
      out += ',';
      out += fmt_g17(s.state.s_plus);
      out += ',';
      out += fmt_g17(s.state.s_minus);
      out += ',';
      out += fmt_g17(s.state.S);
      out += ',';
      out += fmt_g17(s.state.x_sr);
      out += ',';
      out += std::to_string(stability_flag(s.state.stability));
      out += '\n';
    }
  }
  return out;
}

inline nlohmann::json branch_curve_json(const BranchCurve& c,
                                        const SystemParams& p) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : c.samples) {
    samples.push_back({{"param", s.param},
                       {"branch_id", to_string(s.branch)},
                       {"s_plus", s.state.s_plus},
                       {"s_minus", s.state.s_minus},
                       {"S", s.state.S},
                       {"x_sr", s.state.x_sr},
                       {"ellipticity", s.state.ellipticity},
                       {"stable", stability_flag(s.state.stability)}});
  }
  nlohmann::json j{{"swept", c.swept == SweptParam::delta_c ? "delta_c" : "s_max"},
                   {"samples", samples},
                   {"turning_points", c.turning_points},
                   {"params", params_json(p)}};
  if (c.ps_threshold) j["ps_threshold"] = *c.ps_threshold;
  return j;
}

// --- spectra -----------------------------------------------------------------

inline std::string spectrum_csv(const SpectrumResult& r) {
  std::string out = "omega,theta_opt,s_min,s_max_trace\n";
  for (std::size_t i = 0; i < r.omega.size(); ++i) {
    out += fmt_g17(r.omega[i]);
    out += ',';
    out += fmt_g17(r.theta_opt[i]);
    out += ',';
    out += fmt_g17(r.s_min[i]);
    out += ',';
    out += fmt_g17(r.s_max_trace[i]);
    out += '\n';
  }
  return out;
}

inline nlohmann::json spectrum_json(const SpectrumResult& r) {
  return nlohmann::json{{"mode", r.mode},
                        {"engine", r.engine},
                        {"omega", r.omega},
                        {"theta", r.theta},
                        {"power", r.power},
                        {"s_min", r.s_min},
                        {"s_max_trace", r.s_max_trace},
                        {"theta_opt", r.theta_opt},
                        {"params", params_json(r.params)},
                        {"params_hash", r.params_hash}};
}

inline nlohmann::json stokes_json(const StokesReport& rep,
                                  const SystemParams& p,
                                  const std::string& engine) {
  return nlohmann::json{
      {"mean", {{"s0", rep.mean.s0}, {"sx", rep.mean.sx},
                {"sy", rep.mean.sy}, {"sz", rep.mean.sz}}},
      {"omega", rep.omega},
      {"v_sy_over_s0", rep.v_sy},
      {"v_sz_over_s0", rep.v_sz},
      {"v_sq_over_s0", rep.v_sq},
      {"v_antisq_over_s0", rep.v_antisq},
      {"theta_x", rep.theta_x},
      {"theta_sq", rep.theta_sq},
      {"squeezed_combo", rep.squeezed_combo},
      {"polarization_squeezed", rep.polarization_squeezed},
      {"spectrum_source", engine},
      {"params", params_json(p)},
      {"params_hash", rep.params_hash}};
}

// --- manifest ----------------------------------------------------------------

struct RunManifest {
  std::string command;
  SystemParams params;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256

  void add(const std::string& path, const std::string& content) {
    outputs.emplace_back(path, sha256_hex(content));
  }

  nlohmann::json to_json() const {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& [path, hash] : outputs)
      files.push_back({{"path", path}, {"sha256", hash}});
    return nlohmann::json{{"command", command},
                          {"tool_version", kVersion},
                          {"params", params_json(params)},
                          {"outputs", files}};
  }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << content;
}

}  // namespace polsqz
