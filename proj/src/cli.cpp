#include "emo/cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <regex>
#include <type_traits>

#include <CLI11.hpp>

#include "emo/error.hpp"
#include "emo/fs_util.hpp"
#include "emo/hash.hpp"
#include "emo/metrics.hpp"
#include "emo/report.hpp"

namespace emo::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void allow(const json& o, std::initializer_list<std::string_view> keys, const std::string& where) {
  if (!o.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : o.items()) {
    if (std::find(keys.begin(), keys.end(), item.key()) == keys.end())
      throw ConfigError("unknown config key '" + where + "." + item.key() + "'");
  }
}

template <class T>
void read(const json& o, const char* key, T& dst, const std::string& where) {
  if (!o.contains(key)) return;
  const json& v = o.at(key);
  if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
  } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
  }
  try {
    dst = v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

void check_name(const std::string& name, const std::string& where) {
  static const std::regex ok("[A-Za-z0-9_.-]+");
  if (!std::regex_match(name, ok) || name == "." || name == "..")
    throw ConfigError(where + ": name '" + name + "' must match [A-Za-z0-9_.-]+");
}

SynthConfig parse_synth(const json& o) {
  allow(o, {"num_real", "num_fake_video", "num_fake_audio", "num_fake_both", "seq_len_video", "seq_len_audio",
            "latent_dim", "inconsistency_strength", "manipulation_tag_pool", "video_dim", "audio_dim"},
        "synth");
  SynthConfig c;
  read(o, "num_real", c.num_real, "synth");
  read(o, "num_fake_video", c.num_fake_video, "synth");
  read(o, "num_fake_audio", c.num_fake_audio, "synth");
  read(o, "num_fake_both", c.num_fake_both, "synth");
  read(o, "seq_len_video", c.seq_len_video, "synth");
  read(o, "seq_len_audio", c.seq_len_audio, "synth");
  read(o, "latent_dim", c.latent_dim, "synth");
  read(o, "inconsistency_strength", c.inconsistency_strength, "synth");
  read(o, "manipulation_tag_pool", c.manipulation_tag_pool, "synth");
  read(o, "video_dim", c.video_dim, "synth");
  read(o, "audio_dim", c.audio_dim, "synth");
  c.validate();
  return c;
}

SplitSettings parse_splits(const json& o) {
  allow(o, {"ratios", "val_test_fraction", "leave_one_out"}, "splits");
  SplitSettings s;
  if (o.contains("ratios")) {
    std::vector<double> r;
    read(o, "ratios", r, "splits");
    if (r.size() != 3) throw ConfigError("splits.ratios must hold three numbers (train, val, test)");
    s.ratios = {r[0], r[1], r[2]};
  }
  read(o, "val_test_fraction", s.val_test_fraction, "splits");
  if (s.val_test_fraction != 0.0 && !(s.val_test_fraction > 0.0 && s.val_test_fraction < 1.0))
    throw ConfigError("splits.val_test_fraction must be 0 or in (0, 1)");
  if (o.contains("leave_one_out")) {
    if (!o["leave_one_out"].is_array()) throw ConfigError("splits.leave_one_out must be an array");
    for (const json& g : o["leave_one_out"]) {
      allow(g, {"name", "tags"}, "splits.leave_one_out[]");
      TagGroup tg;
      read(g, "name", tg.name, "splits.leave_one_out[]");
      read(g, "tags", tg.tags, "splits.leave_one_out[]");
      check_name(tg.name, "splits.leave_one_out");
      if (tg.name == "in_domain") throw ConfigError("splits.leave_one_out: 'in_domain' is reserved");
      s.leave_one_out.push_back(std::move(tg));
    }
  }
  return s;
}

void parse_train(const json& o, TrainConfig& t, std::vector<std::string>& plans) {
  allow(o, {"learning_rate", "weight_decay", "optimizer_epsilon", "dropout", "max_epochs", "scheduler_patience",
            "scheduler_factor", "early_stop_patience", "alpha", "margin", "batch_size", "fusion_strategy",
            "disable_contrastive", "disable_temporal_transformers", "modality", "encoder", "audio_input_dim", "plans"},
        "train");
  const std::string w = "train";
  read(o, "learning_rate", t.learning_rate, w);
  read(o, "weight_decay", t.weight_decay, w);
  read(o, "optimizer_epsilon", t.optimizer_epsilon, w);
  read(o, "dropout", t.dropout, w);
  read(o, "max_epochs", t.max_epochs, w);
  read(o, "scheduler_patience", t.scheduler_patience, w);
  read(o, "scheduler_factor", t.scheduler_factor, w);
  read(o, "early_stop_patience", t.early_stop_patience, w);
  read(o, "alpha", t.alpha, w);
  read(o, "margin", t.margin, w);
  read(o, "batch_size", t.batch_size, w);
  read(o, "disable_contrastive", t.disable_contrastive, w);
  read(o, "disable_temporal_transformers", t.disable_temporal_transformers, w);
  read(o, "audio_input_dim", t.audio_input_dim, w);
  read(o, "plans", plans, w);
  std::string s;
  if (o.contains("fusion_strategy")) {
    read(o, "fusion_strategy", s, w);
    t.fusion_strategy = parse_fusion(s);
  }
  if (o.contains("modality")) {
    read(o, "modality", s, w);
    t.modality = parse_modality(s);
  }
  if (o.contains("encoder")) {
    const json& e = o["encoder"];
    allow(e, {"depth", "model_dim", "num_heads", "ffn_multiplier", "max_seq_len", "use_positional"}, "train.encoder");
    read(e, "depth", t.encoder.depth, "train.encoder");
    read(e, "model_dim", t.encoder.model_dim, "train.encoder");
    read(e, "num_heads", t.encoder.num_heads, "train.encoder");
    read(e, "ffn_multiplier", t.encoder.ffn_multiplier, "train.encoder");
    read(e, "max_seq_len", t.encoder.max_seq_len, "train.encoder");
    read(e, "use_positional", t.encoder.use_positional, "train.encoder");
  }
}

DetectorSettings parse_detector(const json& o, const fs::path& config_dir) {
  allow(o, {"type", "feature_dim", "signal_strength", "blind_tags", "signal_scale", "noise_scale", "index"}, "detector");
  DetectorSettings d;
  d.enabled = true;
  read(o, "type", d.type, "detector");
  if (d.type == "mock") {
    if (o.contains("index")) throw ConfigError("detector.index is only valid for type 'sidecar'");
    read(o, "feature_dim", d.mock.feature_dim, "detector");
    read(o, "signal_strength", d.mock.signal_strength, "detector");
    read(o, "blind_tags", d.mock.blind_tags, "detector");
    read(o, "signal_scale", d.mock.signal_scale, "detector");
    read(o, "noise_scale", d.mock.noise_scale, "detector");
    d.mock.validate();
  } else if (d.type == "sidecar") {
    for (const char* k : {"feature_dim", "signal_strength", "blind_tags", "signal_scale", "noise_scale"}) {
      if (o.contains(k)) throw ConfigError(std::string("detector.") + k + " is only valid for type 'mock'");
    }
    std::string index;
    read(o, "index", index, "detector");
    if (index.empty()) throw ConfigError("detector.index is required for type 'sidecar'");
    d.sidecar_index = config_dir / index;
  } else {
    throw ConfigError("detector.type must be 'mock' or 'sidecar'");
  }
  return d;
}

EmoBoostConfig parse_emoboost(const json& o) {
  allow(o, {"fusion", "projection_layers", "learning_rate", "weight_decay", "optimizer_epsilon", "max_epochs",
            "early_stop_patience", "scheduler_patience", "scheduler_factor", "batch_size"},
        "emoboost");
  EmoBoostConfig c;
  const std::string w = "emoboost";
  if (o.contains("fusion")) {
    std::string s;
    read(o, "fusion", s, w);
    c.fusion = parse_late_fusion(s);
  }
  read(o, "projection_layers", c.projection_layers, w);
  read(o, "learning_rate", c.learning_rate, w);
  read(o, "weight_decay", c.weight_decay, w);
  read(o, "optimizer_epsilon", c.optimizer_epsilon, w);
  read(o, "max_epochs", c.max_epochs, w);
  read(o, "early_stop_patience", c.early_stop_patience, w);
  read(o, "scheduler_patience", c.scheduler_patience, w);
  read(o, "scheduler_factor", c.scheduler_factor, w);
  read(o, "batch_size", c.batch_size, w);
  c.validate();
  return c;
}

std::vector<ReportInput> parse_report(const json& o) {
  allow(o, {"inputs"}, "report");
  std::vector<ReportInput> out;
  if (!o.contains("inputs")) return out;
  if (!o["inputs"].is_array()) throw ConfigError("report.inputs must be an array");
  for (const json& in : o["inputs"]) {
    allow(in, {"model", "scale", "splits"}, "report.inputs[]");
    ReportInput r;
    read(in, "model", r.model, "report.inputs[]");
    read(in, "scale", r.scale, "report.inputs[]");
    if (r.scale != "fraction" && r.scale != "percent") throw ConfigError("report.inputs[].scale must be 'fraction' or 'percent'");
    if (!in.contains("splits") || !in["splits"].is_array() || in["splits"].empty())
      throw ConfigError("report.inputs[].splits must be a nonempty array");
    for (const json& s : in["splits"]) {
      allow(s, {"name", "auc"}, "report.inputs[].splits[]");
      SplitMetrics m;
      read(s, "name", m.name, "report.inputs[].splits[]");
      if (!s.contains("auc")) throw ConfigError("report.inputs[].splits[].auc is required");
      read(s, "auc", m.auc, "report.inputs[].splits[]");
      r.splits.push_back(std::move(m));
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

RunConfig parse_config(const json& j, std::optional<std::uint64_t> seed_flag, std::optional<fs::path> out_flag,
                       const fs::path& config_dir) {
  allow(j, {"seed", "out", "synth", "data", "splits", "train", "detector", "emoboost", "ablate", "report"}, "config");
  RunConfig c;
  c.raw = j;

  if (j.contains("seed")) {
    read(j, "seed", c.seed, "config");
    if (seed_flag && *seed_flag != c.seed) throw ConfigError("--seed conflicts with the config's seed");
  } else if (seed_flag) {
    c.seed = *seed_flag;
  }
  c.raw["seed"] = c.seed;

  if (j.contains("out")) {
    std::string out;
    read(j, "out", out, "config");
    c.out = config_dir / out;
    if (out_flag && fs::weakly_canonical(*out_flag) != fs::weakly_canonical(c.out))
      throw ConfigError("--out conflicts with the config's out");
  } else if (out_flag) {
    c.out = *out_flag;
  } else {
    throw ConfigError("no output directory: set 'out' in the config or pass --out");
  }

  if (j.contains("synth") && j.contains("data")) throw ConfigError("config may hold 'synth' or 'data', not both");
  if (j.contains("synth")) {
    c.synth = parse_synth(j["synth"]);
    c.synth->seed = derive_seed(c.seed, "synth");
  }
  if (j.contains("data")) {
    allow(j["data"], {"manifest"}, "data");
    std::string m;
    read(j["data"], "manifest", m, "data");
    if (m.empty()) throw ConfigError("data.manifest is required");
    c.manifest = config_dir / m;
  }
  if (j.contains("splits")) c.splits = parse_splits(j["splits"]);
  if (j.contains("train")) parse_train(j["train"], c.train, c.train_plans);
  c.train.validate();
  for (const auto& p : c.train_plans) check_name(p, "train.plans");
  if (j.contains("detector")) {
    c.detector = parse_detector(j["detector"], config_dir);
    c.detector.mock.seed = derive_seed(c.seed, "detector");
  }
  if (j.contains("emoboost")) c.emoboost = parse_emoboost(j["emoboost"]);
  if (j.contains("ablate")) {
    allow(j["ablate"], {"plan"}, "ablate");
    read(j["ablate"], "plan", c.ablate_plan, "ablate");
    check_name(c.ablate_plan, "ablate.plan");
  }
  if (j.contains("report")) c.report_inputs = parse_report(j["report"]);
  return c;
}

namespace {

struct Context {
  const RunConfig& cfg;
  std::ostream& log;
  std::vector<fs::path> artifacts;

  fs::path manifest_path() const { return cfg.manifest ? *cfg.manifest : cfg.out / "data" / "manifest.json"; }
  fs::path splits_path() const { return cfg.out / "splits.json"; }
  fs::path model_dir(const std::string& plan) const { return cfg.out / "models" / plan; }
  fs::path reports_dir() const { return cfg.out / "reports"; }

  void write_json(const fs::path& p, const json& j) {
    write_file_atomic(p, j.dump(2) + "\n");
    artifacts.push_back(p);
  }
  void write_text(const fs::path& p, const std::string& s) {
    write_file_atomic(p, s);
    artifacts.push_back(p);
  }
};

json read_json_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
  try {
    return json::parse(read_file_text(p));
  } catch (const json::exception& e) {
    throw Error("cannot parse " + p.string() + ": " + e.what());
  }
}

DatasetManifest load_data_manifest(const Context& ctx) {
  const fs::path p = ctx.manifest_path();
  if (!fs::exists(p)) {
    throw ConfigError("manifest not found: " + p.string() + (ctx.cfg.manifest ? "" : " (run 'synth' first)"));
  }
  return load_manifest(p, true);
}

std::vector<SplitPlan> load_plans(const Context& ctx) {
  const json j = read_json_file(ctx.splits_path(), "split plans");
  std::vector<SplitPlan> plans;
  try {
    for (const json& p : j.at("plans")) plans.push_back(plan_from_json(p));
  } catch (const json::exception& e) {
    throw Error(std::string("bad splits file: ") + e.what());
  }
  return plans;
}

std::vector<SplitPlan> selected_plans(const Context& ctx) {
  auto plans = load_plans(ctx);
  if (ctx.cfg.train_plans.empty()) return plans;
  std::vector<SplitPlan> out;
  for (const auto& name : ctx.cfg.train_plans) {
    auto it = std::find_if(plans.begin(), plans.end(), [&](const SplitPlan& p) { return p.name == name; });
    if (it == plans.end()) throw ConfigError("train.plans names unknown plan '" + name + "'");
    out.push_back(*it);
  }
  return out;
}

const SplitPlan& find_plan(const std::vector<SplitPlan>& plans, const std::string& name) {
  for (const auto& p : plans) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown split plan '" + name + "'");
}

void check_dims(const Dataset& data, const ModelOptions& o) {
  for (const auto& s : data) {
    if (s.video.num_frames > 0 && static_cast<int>(s.video.dim) != o.encoder.model_dim)
      throw ConfigError("video embedding dim " + std::to_string(s.video.dim) + " != train.encoder.model_dim " +
                        std::to_string(o.encoder.model_dim));
    if (s.audio.num_frames > 0 && static_cast<int>(s.audio.dim) != o.audio_input_dim)
      throw ConfigError("audio embedding dim " + std::to_string(s.audio.dim) + " != train.audio_input_dim " +
                        std::to_string(o.audio_input_dim));
    if (static_cast<int>(std::max(s.video.num_frames, s.audio.num_frames)) > o.encoder.max_seq_len)
      throw ConfigError("sample " + s.sample.id + " is longer than train.encoder.max_seq_len");
  }
}

Dataset load_part(const DatasetManifest& m, const std::vector<std::string>& ids, const ModelOptions& o) {
  Dataset d = load_dataset(subset(m, ids), load_options_for(o));
  check_dims(d, o);
  return d;
}

std::vector<int> labels_of(const Dataset& d) {
  std::vector<int> out;
  for (const auto& s : d) out.push_back(s.sample.label);
  return out;
}

std::vector<double> logits_of(const std::vector<Prediction>& preds) {
  std::vector<double> out;
  for (const auto& p : preds) out.push_back(p.logit);
  return out;
}

std::unique_ptr<FrozenDetector> make_detector(const RunConfig& cfg) {
  if (!cfg.detector.enabled) throw ConfigError("this command needs a 'detector' section");
  if (cfg.detector.type == "sidecar") return std::make_unique<SidecarDetector>(cfg.detector.sidecar_index);
  return std::make_unique<MockDetector>(cfg.detector.mock);
}

std::string file_hash(const fs::path& p) { return to_hex(fnv1a64(read_file_bytes(p))); }

TrainResult train_logged(Context& ctx, const Dataset& train, const Dataset& val, const TrainConfig& tc,
                         const std::string& tag) {
  return train_emoforensics(train, val, tc, [&](const EpochRecord& r) {
    ctx.log << tag << " epoch " << r.epoch << " train_loss " << r.train_loss << " val_loss " << r.val_loss << " lr "
            << r.lr;
    if (r.val_auc) ctx.log << " val_auc " << *r.val_auc;
    ctx.log << "\n";
  });
}

void cmd_synth(Context& ctx) {
  if (!ctx.cfg.synth) throw ConfigError("'synth' needs a 'synth' section");
  const fs::path dir = ctx.cfg.out / "data";
  const DatasetManifest m = generate_synthetic_dataset(*ctx.cfg.synth, dir);
  ctx.artifacts.push_back(dir / "manifest.json");
  ctx.log << "synth: wrote " << m.samples.size() << " samples to " << dir.string() << "\n";
}

void cmd_splits(Context& ctx) {
  const DatasetManifest m = load_data_manifest(ctx);
  const SplitSettings& s = ctx.cfg.splits;
  const std::uint64_t seed = derive_seed(ctx.cfg.seed, "splits");
  SplitPlan base = make_in_domain_split(m, s.ratios, seed);
  std::vector<SplitPlan> plans = make_leave_one_out_splits(m, s.leave_one_out, base);
  plans.insert(plans.begin(), base);
  json arr = json::array();
  for (auto& p : plans) {
    if (s.val_test_fraction > 0.0) carve_val_test(p, m, s.val_test_fraction, seed);
    validate_plan(p, m);
    arr.push_back(to_json(p));
    ctx.log << "splits: " << p.name << " train " << p.train.size() << " val " << p.val.size() << " test "
            << p.test.size() << " val_test " << p.val_test.size() << "\n";
  }
  ctx.write_json(ctx.splits_path(), {{"plans", arr}});
}

void cmd_train_emoforensics(Context& ctx) {
  const DatasetManifest m = load_data_manifest(ctx);
  for (const SplitPlan& plan : selected_plans(ctx)) {
    TrainConfig tc = ctx.cfg.train;
    tc.seed = derive_seed(ctx.cfg.seed, "train/" + plan.name);
    const ModelOptions o = tc.model_options();
    const Dataset train = load_part(m, plan.train, o);
    const Dataset val = load_part(m, plan.val, o);
    const TrainResult r = train_logged(ctx, train, val, tc, plan.name);
    const fs::path dir = ctx.model_dir(plan.name);
    save_model(r.model, dir / "emoforensics.ckpt");
    ctx.artifacts.push_back(dir / "emoforensics.ckpt");
    ctx.write_json(dir / "history.json", {{"best_epoch", r.best_epoch}, {"history", history_to_json(r.history)}});
  }
}

void cmd_train_emoboost(Context& ctx) {
  const DatasetManifest m = load_data_manifest(ctx);
  const auto detector = make_detector(ctx.cfg);
  for (const SplitPlan& plan : selected_plans(ctx)) {
    const fs::path dir = ctx.model_dir(plan.name);
    const fs::path ckpt = dir / "emoforensics.ckpt";
    const std::string before = fs::exists(ckpt) ? file_hash(ckpt) : "";
    const EmoForensicsModel emo = load_model(ckpt);
    const std::uint64_t det_before = detector->checksum();
    EmoBoostConfig bc = ctx.cfg.emoboost;
    bc.seed = derive_seed(ctx.cfg.seed, "emoboost/" + plan.name);
    const Dataset train = load_part(m, plan.train, emo.options);
    const Dataset val = load_part(m, plan.val, emo.options);
    const EmoBoostResult r = train_emoboost(train, val, emo, *detector, bc);
    const std::string after = file_hash(ckpt);
    if (after != before || detector->checksum() != det_before) throw Error("frozen component changed during training");
    save_heads(r.heads, dir / "emoboost.ckpt");
    ctx.artifacts.push_back(dir / "emoboost.ckpt");
    ctx.write_json(dir / "emoboost_history.json",
                   {{"best_epoch", r.best_epoch},
                    {"frozen", {{"emoforensics_checkpoint", after}, {"detector", to_hex(detector->checksum())}}},
                    {"history", history_to_json(r.history)}});
    ctx.log << plan.name << ": emoboost best epoch " << r.best_epoch << "\n";
  }
}

void cmd_eval(Context& ctx) {
  const DatasetManifest m = load_data_manifest(ctx);
  const auto plans = selected_plans(ctx);
  std::vector<SplitMetrics> emo_rows, boost_rows;
  std::unique_ptr<FrozenDetector> detector;
  bool boosted = ctx.cfg.detector.enabled;
  for (const SplitPlan& plan : plans) boosted = boosted && fs::exists(ctx.model_dir(plan.name) / "emoboost.ckpt");
  if (boosted) detector = make_detector(ctx.cfg);

  for (const SplitPlan& plan : plans) {
    const EmoForensicsModel emo = load_model(ctx.model_dir(plan.name) / "emoforensics.ckpt");
    const Dataset test = load_part(m, plan.reporting_test(), emo.options);
    const auto preds = predict(emo, test);
    emo_rows.push_back(score_split(plan.name, logits_of(preds), labels_of(test)));
    if (boosted) {
      const EmoBoostHeads heads = load_heads(ctx.model_dir(plan.name) / "emoboost.ckpt");
      const FeatureSet fs_ = extract_features(emo, *detector, test);
      boost_rows.push_back(score_split(plan.name, emoboost_predict(heads, fs_), fs_.labels));
    }
  }
  std::vector<EvalReport> reports{make_report("EmoForensics", emo_rows)};
  ctx.write_json(ctx.reports_dir() / "eval.json", to_json(reports[0]));
  if (boosted) {
    reports.push_back(make_report("Emo-Boost", boost_rows));
    ctx.write_json(ctx.reports_dir() / "eval_emoboost.json", to_json(reports[1]));
  }
  const std::string table = format_table(reports);
  ctx.write_text(ctx.reports_dir() / "eval.txt", table);
  ctx.log << table;
}

void cmd_ablate(Context& ctx) {
  const DatasetManifest m = load_data_manifest(ctx);
  const auto plans = load_plans(ctx);
  const SplitPlan& plan = find_plan(plans, ctx.cfg.ablate_plan);

  struct Variant {
    std::string name, kind;
    TrainConfig tc;
  };
  const TrainConfig base = ctx.cfg.train;
  std::vector<Variant> variants;
  auto add = [&](std::string name, std::string kind, auto edit) {
    TrainConfig tc = base;
    edit(tc);
    variants.push_back({std::move(name), std::move(kind), tc});
  };
  add("full", "ablation", [](TrainConfig&) {});
  add("no_contrastive", "ablation", [](TrainConfig& t) { t.disable_contrastive = true; });
  add("no_transformers", "ablation", [](TrainConfig& t) { t.disable_temporal_transformers = true; });
  add("video_only", "ablation", [](TrainConfig& t) { t.modality = ModalityMode::video_only; });
  add("audio_only", "ablation", [](TrainConfig& t) { t.modality = ModalityMode::audio_only; });
  for (FusionStrategy f : {FusionStrategy::add, FusionStrategy::concat, FusionStrategy::product}) {
    if (f == base.fusion_strategy) continue;  // same as "full"
    add("fusion_" + std::string(to_string(f)), "fusion", [f](TrainConfig& t) { t.fusion_strategy = f; });
  }

  json rows = json::array();
  std::vector<EvalReport> table;
  EmoForensicsModel full_model;
  for (const Variant& v : variants) {
    TrainConfig tc = v.tc;
    tc.seed = derive_seed(ctx.cfg.seed, "ablate/" + v.name);
    const ModelOptions o = tc.model_options();
    const Dataset train = load_part(m, plan.train, o);
    const Dataset val = load_part(m, plan.val, o);
    const Dataset test = load_part(m, plan.reporting_test(), o);
    const TrainResult r = train_logged(ctx, train, val, tc, v.name);
    const fs::path dir = ctx.cfg.out / "ablate" / v.name;
    save_model(r.model, dir / "emoforensics.ckpt");
    ctx.artifacts.push_back(dir / "emoforensics.ckpt");
    const SplitMetrics sm = score_split(plan.name, logits_of(predict(r.model, test)), labels_of(test));
    rows.push_back({{"variant", v.name}, {"kind", v.kind}, {"auc", sm.auc}, {"ap", *sm.ap}});
    table.push_back(make_report(v.name, {sm}));
    if (v.name == "full") full_model = r.model;
  }
  if (ctx.cfg.detector.enabled) {
    const auto detector = make_detector(ctx.cfg);
    const Dataset train = load_part(m, plan.train, full_model.options);
    const Dataset val = load_part(m, plan.val, full_model.options);
    const Dataset test = load_part(m, plan.reporting_test(), full_model.options);
    const FeatureSet ftr = extract_features(full_model, *detector, train);
    const FeatureSet fva = extract_features(full_model, *detector, val);
    const FeatureSet fte = extract_features(full_model, *detector, test);
    for (LateFusion f : {LateFusion::product, LateFusion::add, LateFusion::concat}) {
      EmoBoostConfig bc = ctx.cfg.emoboost;
      bc.fusion = f;
      const std::string name = "late_" + std::string(to_string(f));
      bc.seed = derive_seed(ctx.cfg.seed, "ablate/" + name);
      const EmoBoostResult r = train_emoboost(ftr, fva, bc);
      const SplitMetrics sm = score_split(plan.name, emoboost_predict(r.heads, fte), fte.labels);
      rows.push_back({{"variant", name}, {"kind", "late_fusion"}, {"auc", sm.auc}, {"ap", *sm.ap}});
      table.push_back(make_report(name, {sm}));
    }
  }
  ctx.write_json(ctx.reports_dir() / "ablation.json", {{"plan", plan.name}, {"rows", rows}});
  const std::string text = format_table(table);
  ctx.write_text(ctx.reports_dir() / "ablation.txt", text);
  ctx.log << text;
}

void cmd_report(Context& ctx) {
  std::vector<EvalReport> reports;
  for (const ReportInput& in : ctx.cfg.report_inputs) reports.push_back(make_report(in.model, in.splits, in.scale));
  for (const char* name : {"eval.json", "eval_emoboost.json"}) {
    const fs::path p = ctx.reports_dir() / name;
    if (fs::exists(p)) reports.push_back(report_from_json(read_json_file(p, "report")));
  }
  if (reports.empty()) throw ConfigError("nothing to report: add report.inputs or run 'eval' first");
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  ctx.write_json(ctx.reports_dir() / "report.json", {{"reports", arr}});
  const std::string table = format_table(reports);
  ctx.write_text(ctx.reports_dir() / "report.txt", table);
  ctx.log << table;
}

void write_provenance(Context& ctx, std::string_view command) {
  json artifacts = json::object();
  for (const auto& p : ctx.artifacts) artifacts[fs::relative(p, ctx.cfg.out).generic_string()] = file_hash(p);
  const std::string canon = ctx.cfg.raw.dump();
  json prov{{"command", command},
            {"config_hash", to_hex(fnv1a64({reinterpret_cast<const std::uint8_t*>(canon.data()), canon.size()}))},
            {"seed", ctx.cfg.seed},
            {"config", ctx.cfg.raw},
            {"artifacts", artifacts}};
  std::string file(command);
  write_file_atomic(ctx.cfg.out / "provenance" / (file + ".json"), prov.dump(2) + "\n");
}

}  // namespace

void run(std::string_view command, const RunConfig& cfg, std::ostream& log) {
  Context ctx{cfg, log, {}};
  if (command == "synth") cmd_synth(ctx);
  else if (command == "splits") cmd_splits(ctx);
  else if (command == "train-emoforensics") cmd_train_emoforensics(ctx);
  else if (command == "train-emoboost") cmd_train_emoboost(ctx);
  else if (command == "eval") cmd_eval(ctx);
  else if (command == "ablate") cmd_ablate(ctx);
  else if (command == "report") cmd_report(ctx);
  else throw ConfigError("unknown command '" + std::string(command) + "'");
  write_provenance(ctx, command);
}

namespace {

void print_error(std::ostream& err, const char* kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main_entry(int argc, char** argv, std::ostream& log, std::ostream& err) {
  CLI::App app{"Emotion-consistency deepfake detection on embedding sequences"};
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> names(std::begin(kCommands), std::end(kCommands));
  app.add_option("command", command, "one of: synth, splits, train-emoforensics, train-emoboost, eval, ablate, report")
      ->required()
      ->check(CLI::IsMember(names));
  app.add_option("-c,--config", config_path, "JSON run configuration")->required();
  app.add_option("--seed", seed, "global seed (must agree with the config)");
  app.add_option("--out", out, "output directory (must agree with the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    log << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  }

  try {
    const fs::path cfg_file(config_path);
    const json j = read_json_file(cfg_file, "config");
    std::optional<fs::path> out_path;
    if (out) out_path = fs::path(*out);
    const RunConfig cfg = parse_config(j, seed, out_path, cfg_file.parent_path());
    run(command, cfg, log);
    return 0;
  } catch (const ConfigError& e) {
    print_error(err, "config", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error(err, "runtime", e.what());
    return 1;
  }
}

}  // namespace emo::cli
