// Command-line front end: dataset generation, curation, training, evaluation
// and offline transcript scoring.
//
// Exit codes: 0 success, 1 usage error, 2 data or format error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "taco/policy.hpp"
#include "taco/records.hpp"
#include "taco/rewards.hpp"
#include "taco/rng.hpp"
#include "taco/run_config.hpp"
#include "taco/sampler.hpp"
#include "taco/synth_env.hpp"
#include "taco/trainer.hpp"
#include "taco/transcript.hpp"
#include "taco/ttrs.hpp"

namespace fs = std::filesystem;
using namespace taco;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t seed_fallback(std::uint64_t dflt) {
  if (const char* env = std::getenv("TACO_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("TACO_SEED is not an unsigned integer: '{}'", env));
    }
  }
  return dflt;
}

Json report_json(const EvalReport& r) {
  Json j;
  j["acc_at_05"] = r.acc_at_05;
  j["mean_iou"] = r.mean_iou;
  j["count"] = r.count;
  return j;
}

void emit(const Json& j, const std::optional<fs::path>& out) {
  std::cout << j.dump(2) << '\n';
  if (out) write_json_file(*out, j);
}

// --- generate -------------------------------------------------------------

struct GenerateArgs {
  std::size_t count = 100;
  std::optional<double> difficulty;
  std::optional<std::uint64_t> seed;
  std::uint64_t first_id = 0;
  std::string vqa;
  fs::path out;
};

int run_generate(const GenerateArgs& a) {
  if (a.difficulty && (*a.difficulty < 0.0 || *a.difficulty > 1.0)) {
    throw UsageError("--difficulty must lie in [0,1]");
  }
  const std::uint64_t seed = a.seed ? *a.seed : seed_fallback(7);
  std::vector<Json> rows;
  rows.reserve(a.count);
  for (std::size_t i = 0; i < a.count; ++i) {
    const Scene s = pool_scene(seed, a.first_id + i, a.difficulty);
    if (a.vqa.empty()) {
      rows.push_back(scene_to_json(s));
    } else {
      rows.push_back(vqa_to_json(make_vqa_record(s, parse_answer_mode(a.vqa))));
    }
  }
  write_jsonl(a.out, rows);
  std::cerr << fmt::format("wrote {} records to {}\n", rows.size(), a.out.string());
  return 0;
}

// --- curate ---------------------------------------------------------------

struct CurateArgs {
  fs::path data;
  std::optional<fs::path> checkpoint;
  fs::path out;
  int scale = 336;
  double threshold = 0.5;
  double ratio = 2.0;
  std::optional<std::uint64_t> seed;
};

int run_curate(const CurateArgs& a) {
  const auto scenes = load_scenes(a.data);
  if (scenes.empty()) throw DataError(a.data, 0, "dataset is empty");
  const PolicyParams base = a.checkpoint ? PolicyParams::load(*a.checkpoint) : PolicyParams{};
  Rng rng(derive_seed({a.seed ? *a.seed : seed_fallback(1), 0xC0A7}));
  const auto result = curate(base_accuracy(base, scenes, a.scale, true), a.threshold, a.ratio, rng);
  {
    std::ofstream out(a.out, std::ios::trunc);
    if (!out) throw DataError(a.out, 0, "cannot open for writing");
    for (auto id : result.ids) out << id << '\n';
  }
  Json report;
  report["pool"] = scenes.size();
  report["difficult"] = result.difficult;
  report["simple_total"] = result.simple_total;
  report["simple_selected"] = result.simple_selected;
  report["curated"] = result.ids.size();
  report["degenerate"] = result.degenerate;
  if (result.degenerate) {
    std::cerr << "warning: no difficult samples under the base policy; curated list is empty\n";
  }
  fs::path report_path = a.out;
  report_path += ".report.json";
  emit(report, report_path);
  return 0;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
  std::optional<fs::path> config;
  std::optional<fs::path> data;
  fs::path out_dir;
  std::vector<std::string> settings;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> steps;
  std::string scales;
  bool resume = false;
};

int run_train(const TrainArgs& a) {
  TrainConfig base;
  base.seed = seed_fallback(base.seed);
  TrainConfig cfg = a.config ? load_run_config(*a.config, base) : base;
  for (const auto& kv : a.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError(fmt::format("--set expects key=value, got '{}'", kv));
    try {
      apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.steps) cfg.steps = *a.steps;
  if (!a.scales.empty()) cfg.scales = ScaleSet::parse(a.scales);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  RunOptions opts;
  opts.data = a.data;
  opts.resume = a.resume;
  const auto summary = run_training(cfg, a.out_dir, opts);
  Json j;
  j["steps"] = cfg.steps;
  j["initial_eval"] = report_json(summary.initial_eval);
  j["final_eval"] = report_json(summary.final_eval);
  j["out_dir"] = a.out_dir.string();
  emit(j, std::nullopt);
  return 0;
}

// --- eval / ensemble-eval -------------------------------------------------

struct EvalArgs {
  fs::path checkpoint;
  fs::path data;
  int scale = 672;
  std::string scales = "560,672,800";
  std::optional<fs::path> out;
};

int run_eval(const EvalArgs& a) {
  if (a.scale < 0) throw UsageError("--scale must be >= 0 (0 = native resolution)");
  const auto params = PolicyParams::load(a.checkpoint);
  const auto scenes = load_scenes(a.data);
  Json j = report_json(evaluate(params, scenes, ScalePolicy::single(a.scale)));
  j["scale"] = a.scale;
  emit(j, a.out);
  return 0;
}

int run_ensemble_eval(const EvalArgs& a) {
  ScaleSet set;
  try {
    set = ScaleSet::parse(a.scales);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto params = PolicyParams::load(a.checkpoint);
  const auto scenes = load_scenes(a.data);
  Json j = report_json(evaluate(params, scenes, ScalePolicy::multi(set)));
  j["scales"] = set.targets;
  Json singles = Json::object();
  for (int s : set.targets) {
    singles[std::to_string(s)] = report_json(evaluate(params, scenes, ScalePolicy::single(s)));
  }
  j["single_scale"] = std::move(singles);
  emit(j, a.out);
  return 0;
}

// --- score ----------------------------------------------------------------

struct ScoreArgs {
  fs::path transcripts;
  fs::path gt;
  std::optional<fs::path> out;
};

int run_score(const ScoreArgs& a) {
  std::map<std::uint64_t, std::variant<Scene, VqaRecord>> truth;
  for_each_jsonl(a.gt, [&](const Json& j, std::size_t) {
    const auto id = j.at("id").get<std::uint64_t>();
    bool inserted = j.contains("question") ? truth.emplace(id, vqa_from_json(j)).second
                                           : truth.emplace(id, scene_from_json(j)).second;
    if (!inserted) throw std::invalid_argument(fmt::format("duplicate id {}", id));
  });

  const TokenF1Supervisor supervisor;
  RewardWarnings warnings;
  std::vector<Json> rows;
  RewardBreakdown sum;
  std::size_t rec = 0;
  std::size_t vqa = 0;
  for_each_jsonl(a.transcripts, [&](const Json& j, std::size_t) {
    const auto id = j.at("id").get<std::uint64_t>();
    const auto it = truth.find(id);
    if (it == truth.end()) throw std::invalid_argument(fmt::format("no ground truth for id {}", id));
    const Transcript t = parse_transcript(j.at("transcript").get<std::string>());
    RewardBreakdown r;
    if (const auto* scene = std::get_if<Scene>(&it->second)) {
      r = rec_reward(t, scene->gt_box());
      ++rec;
    } else {
      const auto& q = std::get<VqaRecord>(it->second);
      r = vqa_reward(q.question, t, q.answer, q.mode, supervisor, &warnings);
      ++vqa;
    }
    sum.tac += r.tac;
    sum.acc += r.acc;
    sum.format += r.format;
    sum.total += r.total;
    Json row;
    row["id"] = id;
    row["tac"] = r.tac;
    row["acc"] = r.acc;
    row["format"] = r.format;
    row["total"] = r.total;
    rows.push_back(std::move(row));
  });
  if (a.out) write_jsonl(*a.out, rows);
  const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
  Json j;
  j["count"] = rows.size();
  j["rec"] = rec;
  j["vqa"] = vqa;
  j["mean_tac"] = sum.tac / n;
  j["mean_acc"] = sum.acc / n;
  j["mean_format"] = sum.format / n;
  j["mean_total"] = sum.total / n;
  j["supervisor_clamped"] = warnings.supervisor_clamped.load();
  emit(j, std::nullopt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy optimization on a synthetic referring-grounding task"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic dataset");
  g->add_option("--count", gen.count, "Number of records")->capture_default_str();
  g->add_option("--difficulty", gen.difficulty, "Fixed difficulty in [0,1] (default: mixed)");
  g->add_option("--seed", gen.seed, "Data seed (fallback: TACO_SEED, then 7)");
  g->add_option("--first-id", gen.first_id, "Id of the first record")->capture_default_str();
  g->add_option("--vqa", gen.vqa, "Emit templated VQA records instead of scenes")
      ->check(CLI::IsMember({"closed", "open"}));
  g->add_option("--out", gen.out, "Output JSONL file")->required();

  CurateArgs cur;
  auto* c = app.add_subcommand("curate", "Offline curation with a base policy");
  c->add_option("--data", cur.data, "Dataset JSONL")->required();
  c->add_option("--checkpoint", cur.checkpoint, "Base policy checkpoint (default: initial policy)");
  c->add_option("--out", cur.out, "Curated id list (one id per line)")->required();
  c->add_option("--scale", cur.scale, "Short side the base policy sees")->capture_default_str();
  c->add_option("--threshold", cur.threshold, "Accuracy below which a sample is difficult")
      ->capture_default_str();
  c->add_option("--ratio", cur.ratio, "Simple samples kept per difficult sample")->capture_default_str();
  c->add_option("--seed", cur.seed, "Shuffle seed (fallback: TACO_SEED)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Run training");
  t->add_option("--config", tr.config, "key = value config file");
  t->add_option("--data", tr.data, "Training dataset JSONL (default: generated pool)");
  t->add_option("--out-dir", tr.out_dir, "Run directory")->required();
  t->add_option("--set", tr.settings, "Override a config key (key=value), repeatable");
  t->add_option("--seed", tr.seed, "Training seed (fallback: config, then TACO_SEED)");
  t->add_option("--steps", tr.steps, "Number of steps");
  t->add_option("--scales", tr.scales, "TTME scales, e.g. 560,672,800");
  t->add_flag("--resume", tr.resume, "Continue from the state in --out-dir");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Single-scale evaluation (Acc@0.5)");
  e->add_option("--checkpoint", ev.checkpoint, "Policy checkpoint")->required();
  e->add_option("--data", ev.data, "Evaluation dataset JSONL")->required();
  e->add_option("--scale", ev.scale, "Short side (0 = native)")->capture_default_str();
  e->add_option("--out", ev.out, "Also write the report here");

  EvalArgs ee;
  auto* m = app.add_subcommand("ensemble-eval", "Multi-scale ensemble evaluation");
  m->add_option("--checkpoint", ee.checkpoint, "Policy checkpoint")->required();
  m->add_option("--data", ee.data, "Evaluation dataset JSONL")->required();
  m->add_option("--scales", ee.scales, "Comma-separated short sides")->capture_default_str();
  m->add_option("--out", ee.out, "Also write the report here");

  ScoreArgs sc;
  auto* s = app.add_subcommand("score", "Score logged transcripts against ground truth");
  s->add_option("--transcripts", sc.transcripts, "JSONL of {\"id\", \"transcript\"}")->required();
  s->add_option("--gt", sc.gt, "Dataset JSONL with scenes or VQA records")->required();
  s->add_option("--out", sc.out, "Per-transcript reward breakdown JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitUsage;
  }

  try {
    if (g->parsed()) return run_generate(gen);
    if (c->parsed()) return run_curate(cur);
    if (t->parsed()) return run_train(tr);
    if (e->parsed()) return run_eval(ev);
    if (m->parsed()) return run_ensemble_eval(ee);
    if (s->parsed()) return run_score(sc);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kExitData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
