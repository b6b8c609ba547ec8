// Result serialization: report structs to JSON, record tables to CSV, and
// the run manifest that ties artifacts to the configuration that produced
// them. JSON objects are emitted with sorted keys and shortest round-trip
// numbers, CSV numbers use %.17g, so reruns of the same configuration are
// byte-identical (the manifest's wall_seconds and written_at fields are the
// only volatile values).

#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qflab/averaging.hpp"
#include "qflab/common.hpp"
#include "qflab/dynamics.hpp"
#include "qflab/field.hpp"
#include "qflab/gfcalc.hpp"
#include "qflab/scattering.hpp"

namespace qflab {

using json = nlohmann::json;

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// JSON views of the report structs. Operator-valued members are omitted;
// everything scalar survives.

inline void to_json(json& j, const AverageReport& rep) {
  j = json{{"label", rep.label},
           {"eta_ladder", rep.eta_ladder},
           {"a_values", rep.a_values},
           {"liminf", rep.liminf},
           {"limsup", rep.limsup},
           {"diagnostics", rep.diagnostics}};
  j["limit"] = rep.limit ? json(*rep.limit) : json(nullptr);
  j["seed"] = rep.seed ? json(*rep.seed) : json(nullptr);
}

inline void to_json(json& j, const PRescalingStudy& study) {
  j = json{{"reports", study.reports}, {"spread", study.spread}};
}

inline void to_json(json& j, const InfinitesimalReport::PerTest& t) {
  j = json{{"test_label", t.test_label},
           {"slope", t.slope},
           {"last_pairing", t.last_pairing},
           {"decays", t.decays}};
}

inline void to_json(json& j, const InfinitesimalReport& rep) {
  j = json{{"verdict", rep.verdict},
           {"slope_threshold", rep.slope_threshold},
           {"tests", rep.tests}};
}

inline void to_json(json& j, const CcrReport& rep) {
  j = json{{"scalar_re", rep.scalar.real()},
           {"scalar_im", rep.scalar.imag()},
           {"target", rep.target},
           {"defect", rep.defect},
           {"field_field", rep.field_field},
           {"momentum_momentum", rep.momentum_momentum},
           {"safe_states", rep.safe_states}};
}

inline void to_json(json& j, const DerivativeReport& rep) {
  j = json{{"defect", rep.defect},
           {"defect_halved", rep.defect_halved},
           {"ratio", rep.ratio}};
}

inline void to_json(json& j, const FieldEquationReport& rep) {
  j = json{{"field_defect", rep.field_defect},
           {"momentum_defect", rep.momentum_defect},
           {"unsmeared_residual", rep.unsmeared_residual},
           {"safe_states", rep.safe_states}};
}

inline void to_json(json& j, const Theorem3Report& rep) {
  j = json{{"defect", rep.defect}, {"safe_states", rep.safe_states}};
}

inline void to_json(json& j, const EvolutionResult& res) {
  j = json{{"method", res.method},
           {"times", res.times},
           {"steps", res.times.empty() ? 0 : res.times.size() - 1},
           {"unitarity_defect", res.unitarity_defect},
           {"reference_defect", res.reference_defect}};
}

inline void to_json(json& j, const LadderRung& rung) {
  j = json{{"index", rung.index},
           {"eps", rung.eps},
           {"j_max", rung.j_max},
           {"basis_dim", rung.basis_dim}};
}

inline void to_json(json& j, const AmplitudeRecord& rec) {
  j = json{{"eps", rec.eps},
           {"ladder_index", rec.ladder_index},
           {"j_max", rec.j_max},
           {"spatial_dim", rec.spatial_dim},
           {"basis_dim", rec.basis_dim},
           {"value", rec.value},
           {"phase_re", rec.phase.real()},
           {"phase_im", rec.phase.imag()},
           {"mollifier", rec.mollifier},
           {"seed", rec.seed}};
}

inline void to_json(json& j, const SweepResult& sweep) {
  j = json{{"records", sweep.records},
           {"partial", sweep.partial},
           {"requested_rungs", sweep.requested_rungs}};
}

inline void to_json(json& j, const AssociationReport& rep) {
  j = json{{"per_mollifier", rep.per_mollifier}, {"spread", rep.spread}};
}

// ---------------------------------------------------------------------------
// CSV tables. Cells are written verbatim; callers format numbers with
// fmt_g so a rerun reproduces the file byte for byte.

inline std::string csv_table(const std::vector<std::string>& header,
                             const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  out += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("csv_table: row width differs from header");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += row[c];
    }
    out += '\n';
  }
  return out;
}

inline std::string amplitude_csv(const std::vector<AmplitudeRecord>& records) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    rows.push_back({fmt_g(r.eps), std::to_string(r.j_max),
                    std::to_string(r.basis_dim), r.mollifier, fmt_g(r.value),
                    fmt_g(r.phase.real()), fmt_g(r.phase.imag()),
                    std::to_string(r.seed)});
  }
  return csv_table({"eps", "J", "dim", "mollifier", "value", "phase_re",
                    "phase_im", "seed"},
                   rows);
}

// ---------------------------------------------------------------------------
// Run manifest. One manifest per run directory; it names every artifact the
// run produced together with a content hash, and carries enough metadata to
// reproduce the run (config hash, seed, library version).

struct Artifact {
  std::string path;
  std::string kind;
  std::string content_hash;
  bool incomplete = false;
};

inline void to_json(json& j, const Artifact& a) {
  j = json{{"path", a.path},
           {"kind", a.kind},
           {"content_hash", a.content_hash},
           {"incomplete", a.incomplete}};
}

inline std::uint64_t config_hash(const json& config) {
  return fnv1a(config.dump());
}

inline std::string timestamp_utc() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json manifest_json(const std::string& experiment,
                          const std::string& label, const json& config,
                          std::uint64_t seed, double wall_seconds,
                          const std::vector<Artifact>& artifacts) {
  json j{{"experiment", experiment},
         {"label", label},
         {"config_hash", hash_hex(config_hash(config))},
         {"seed", seed},
         {"artifacts", artifacts},
         {"versions", json{{"qflab", version()}, {"manifest_format", 1}}},
         {"wall_seconds", wall_seconds},
         {"written_at", timestamp_utc()}};
  return j;
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), long(content.size()));
  if (!out.good())
    throw std::runtime_error("write_text: cannot write " + path);
}

inline std::string dump_sorted(const json& j) { return j.dump(2) + "\n"; }

}  // namespace qflab
