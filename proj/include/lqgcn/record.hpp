#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lqgcn/features.hpp"
#include "lqgcn/io.hpp"
#include "lqgcn/trainer.hpp"

// Training logs (JSON lines) and run manifests (JSON).

namespace lqgcn {

inline constexpr std::string_view kVersion = "lqgcn 1.0.0";

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Enum names
// ---------------------------------------------------------------------------

namespace detail {

template <class E, std::size_t N>
struct EnumNames {
  std::pair<E, std::string_view> table[N];

  std::string_view name(E e) const {
    for (const auto& [v, s] : table)
      if (v == e) return s;
    return "?";
  }
  std::optional<E> parse(std::string_view s) const {
    for (const auto& [v, n] : table)
      if (n == s) return v;
    return std::nullopt;
  }
};

inline constexpr EnumNames<Variant, 2> kVariantNames{{{Variant::main, "main"}, {Variant::ablation, "ablation"}}};
inline constexpr EnumNames<InputMode, 3> kInputNames{
    {{InputMode::attributes, "x"}, {InputMode::adjacency, "g"}, {InputMode::concatenated, "u"}}};
inline constexpr EnumNames<OuterPropagation, 3> kOuterNames{{{OuterPropagation::renormalized, "renormalized"},
                                                             {OuterPropagation::augmented, "augmented"},
                                                             {OuterPropagation::raw, "raw"}}};
inline constexpr EnumNames<NullModelScaling, 2> kScalingNames{
    {{NullModelScaling::newman, "newman"}, {NullModelScaling::literal, "literal"}}};
inline constexpr EnumNames<ContrastRule, 2> kContrastNames{
    {{ContrastRule::successor, "successor"}, {ContrastRule::strongest, "strongest"}}};

template <class E, std::size_t N>
E parse_enum(const EnumNames<E, N>& names, std::string_view s, const char* what) {
  if (auto v = names.parse(s)) return *v;
  throw DataError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

}  // namespace detail

inline std::string_view to_string(Variant v) { return detail::kVariantNames.name(v); }
inline std::string_view to_string(InputMode v) { return detail::kInputNames.name(v); }
inline std::string_view to_string(OuterPropagation v) { return detail::kOuterNames.name(v); }
inline std::string_view to_string(NullModelScaling v) { return detail::kScalingNames.name(v); }
inline std::string_view to_string(ContrastRule v) { return detail::kContrastNames.name(v); }

// ---------------------------------------------------------------------------
// Training log
// ---------------------------------------------------------------------------

/// One JSON object per iteration, then a closing {"event":"end",...} line.
inline std::string format_train_log(const TrainLog& log) {
  std::string out;
  for (const auto& r : log.records) {
    Json j;
    j["event"] = "iteration";
    j["iteration"] = r.iteration;
    j["bp"] = r.bp;
    j["lq"] = r.lq ? Json(*r.lq) : Json(nullptr);
    j["total"] = r.total;
    j["counter"] = r.counter;
    j["lq_active"] = r.lq_active;
    out += j.dump();
    out += '\n';
  }
  Json end;
  end["event"] = "end";
  end["iterations"] = log.records.size();
  end["stopped_early"] = log.stopped_early;
  out += end.dump();
  out += '\n';
  return out;
}

inline TrainLog read_train_log(std::istream& in, const std::string& source = "<train log>") {
  TrainLog log;
  std::string line;
  std::size_t lineno = 0;
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) detail::parse_fail(source, lineno, "not a JSON object");
    try {
      const auto event = j.at("event").get<std::string>();
      if (event == "end") {
        log.stopped_early = j.at("stopped_early").get<bool>();
        ended = true;
      } else if (event == "iteration") {
        TrainRecord r;
        r.iteration = j.at("iteration").get<std::size_t>();
        r.bp = j.at("bp").get<double>();
        if (!j.at("lq").is_null()) r.lq = j.at("lq").get<double>();
        r.total = j.at("total").get<double>();
        r.counter = j.at("counter").get<std::size_t>();
        r.lq_active = j.at("lq_active").get<bool>();
        log.records.push_back(r);
      } else {
        detail::parse_fail(source, lineno, "unknown event '" + event + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      detail::parse_fail(source, lineno, e.what());
    }
  }
  if (!ended) throw DataError(source + ": missing end record");
  return log;
}

inline void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
  write_file_atomic(path, format_train_log(log));
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

struct InputFile {
  std::string path;
  std::string sha256;
  friend bool operator==(const InputFile&, const InputFile&) = default;
};

struct RunManifest {
  std::string version{kVersion};
  TrainConfig config;
  InputMode input = InputMode::attributes;
  std::map<std::string, InputFile> inputs;    // edges, attributes, truth
  std::map<std::string, std::string> outputs;  // role -> file name inside the output directory
};

inline Json config_to_json(const TrainConfig& c) {
  Json j;
  j["k"] = c.k;
  j["hidden"] = c.hidden;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["dropout"] = c.dropout;
  j["threshold"] = c.threshold;
  j["max_iters"] = c.max_iters;
  j["patience_lq"] = c.patience_lq;
  j["patience_stop"] = c.patience_stop;
  j["seed"] = c.seed;
  j["variant"] = to_string(c.variant);
  j["outer"] = to_string(c.outer);
  j["lq_enabled"] = c.lq_enabled;
  j["lq_scaling"] = to_string(c.lq_scaling);
  j["contrast"] = to_string(c.contrast);
  j["bp_samples"] = c.bp_samples;
  return j;
}

inline TrainConfig config_from_json(const Json& j) {
  TrainConfig c;
  c.k = j.at("k").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.threshold = j.at("threshold").get<double>();
  c.max_iters = j.at("max_iters").get<std::size_t>();
  c.patience_lq = j.at("patience_lq").get<std::size_t>();
  c.patience_stop = j.at("patience_stop").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.variant = detail::parse_enum(detail::kVariantNames, j.at("variant").get<std::string>(), "variant");
  c.outer = detail::parse_enum(detail::kOuterNames, j.at("outer").get<std::string>(), "outer propagation");
  c.lq_enabled = j.at("lq_enabled").get<bool>();
  c.lq_scaling = detail::parse_enum(detail::kScalingNames, j.at("lq_scaling").get<std::string>(), "scaling");
  c.contrast = detail::parse_enum(detail::kContrastNames, j.at("contrast").get<std::string>(), "contrast rule");
  c.bp_samples = j.at("bp_samples").get<std::size_t>();
  return c;
}

inline std::string format_manifest(const RunManifest& m) {
  Json j;
  j["version"] = m.version;
  j["seed"] = m.config.seed;
  j["input"] = to_string(m.input);
  j["config"] = config_to_json(m.config);
  Json inputs = Json::object();
  for (const auto& [role, f] : m.inputs) inputs[role] = {{"path", f.path}, {"sha256", f.sha256}};
  j["inputs"] = inputs;
  Json outputs = Json::object();
  for (const auto& [role, name] : m.outputs) outputs[role] = name;
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

inline RunManifest parse_manifest_text(std::string_view text, const std::string& source = "<manifest>") {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError(source + ": not a JSON object");
  try {
    RunManifest m;
    m.version = j.at("version").get<std::string>();
    m.config = config_from_json(j.at("config"));
    m.input = detail::parse_enum(detail::kInputNames, j.at("input").get<std::string>(), "input mode");
    for (const auto& [role, f] : j.at("inputs").items())
      m.inputs[role] = {f.at("path").get<std::string>(), f.at("sha256").get<std::string>()};
    for (const auto& [role, name] : j.at("outputs").items()) m.outputs[role] = name.get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": " + e.what());
  }
}

inline RunManifest parse_manifest(const std::filesystem::path& path) {
  return parse_manifest_text(read_file(path), path.string());
}

inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  write_file_atomic(path, format_manifest(m));
}

}  // namespace lqgcn
