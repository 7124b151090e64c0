// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmknn/analysis.hpp"
#include "mmknn/data_io.hpp"
#include "mmknn/embedding_io.hpp"
#include "mmknn/error.hpp"
#include "mmknn/flops_accounting.hpp"
#include "mmknn/synthetic.hpp"
#include "mmknn/trainer.hpp"

namespace mmknn::cli {
namespace {

namespace fs = std::filesystem;

constexpr std::size_t kDefaultEmbedDim = 512;

const std::set<std::string> kPathKeys = {"data", "repo_sentences", "repo_embeddings", "teacher"};

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorKind::kConfig, key + ": not an integer: " + value);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::pair<std::string, std::string>> read_key_values(const fs::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kParse,
                  path.string() + ":" + std::to_string(i + 1) + ": expected key=value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

/// Resolved settings of one invocation.
struct RunSettings {
  DistillConfig config;
  std::map<std::string, std::string> paths;
  std::size_t embed_dim = kDefaultEmbedDim;
  fs::path out_dir;

  void apply(const std::string& key, const std::string& value) {
    if (kPathKeys.count(key)) {
      paths[key] = value;
    } else if (key == "embed_dim") {
      embed_dim = parse_size(key, value);
    } else if (key == "command" || key == "out") {
      // informational manifest keys
    } else {
      apply_setting(config, key, value);
    }
  }

  std::optional<fs::path> path(const std::string& key) const {
    const auto it = paths.find(key);
    if (it == paths.end() || it->second.empty()) return std::nullopt;
    return fs::path(it->second);
  }
};

/// A subcommand whose settings resolve as: flags > config file > defaults.
class Command {
 public:
  Command(CLI::App& app, const std::string& name, const std::string& description)
      : sub_(app.add_subcommand(name, description)) {}

  CLI::App* app() { return sub_; }

  void setting(const std::string& flag, const std::string& key, const std::string& help) {
    bound_.emplace_back(sub_->add_option(flag, values_[key], help), key);
  }

  void training_settings() {
    sub_->add_option("--config", config_file_, "key=value settings file");
    setting("--data", "data", "dataset directory or .jsonl file");
    setting("--repo-sentences", "repo_sentences", "repository sentences, one per line");
    setting("--repo-embeddings", "repo_embeddings", "repository embeddings (EMB1 or text)");
    setting("--teacher", "teacher", "teacher checkpoint; trained when absent");
    setting("--embed-dim", "embed_dim", "dimension of the hashed n-gram embedder");
    setting("--mode", "mode", "no_aug, kd_only, vanilla, minimax or random");
    setting("--k", "k", "neighbours per example");
    setting("--n", "n", "neighbours selected by minimax");
    setting("--epsilon", "epsilon", "maximum teacher-space angular distance (inf: none)");
    setting("--lambda", "lambda", "weight of the distillation term");
    setting("--temperature", "temperature", "distillation temperature");
    setting("--aug-start-epoch", "aug_start_epoch", "first epoch using augmentation");
    setting("--max-epochs", "max_epochs", "epoch limit");
    setting("--patience", "early_stop_patience", "epochs without dev improvement before stopping");
    setting("--lr", "base_lr", "peak learning rate");
    setting("--warmup", "warmup_fraction", "fraction of steps spent warming up");
    setting("--batch-size", "batch_size", "originals per optimizer step");
    setting("--seed", "seed", "seed for every random decision");
    setting("--rerank-by-teacher", "rerank_by_teacher", "true or false");
    setting("--retrieval-depth", "retrieval_depth", "neighbours fetched before reranking");
    setting("--score-temperature", "score_temperature", "temperature of the selection score");
    setting("--reselect-every-step", "reselect_every_step", "true or false");
    setting("--teacher-hidden", "teacher_hidden", "comma-separated hidden sizes");
    setting("--student-hidden", "student_hidden", "comma-separated hidden sizes");
    bound_.emplace_back(sub_->add_option("--threads", values_["threads"], "worker threads")
                            ->envname("MINIMAX_DISTILL_THREADS"),
                        "threads");
    sub_->add_option("--out", out_dir_, "output directory")->required();
  }

  RunSettings resolve() const {
    RunSettings run;
    if (!config_file_.empty()) {
      for (const auto& [key, value] : read_key_values(config_file_)) run.apply(key, value);
    }
    for (const auto& [option, key] : bound_) {
      if (option->count() > 0) run.apply(key, values_.at(key));
    }
    run.out_dir = out_dir_;
    run.config.validate();
    return run;
  }

 private:
  CLI::App* sub_;
  std::map<std::string, std::string> values_;
  std::vector<std::pair<CLI::Option*, std::string>> bound_;
  std::string config_file_;
  std::string out_dir_;
};

struct Loaded {
  Dataset dataset;
  HashedNgramEmbedder embedder;
  ExperimentData data;
};

std::vector<std::string> read_sentences(const fs::path& path) {
  auto lines = read_lines(path);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

SentenceRepository load_repo(const fs::path& sentences, const std::optional<fs::path>& embeddings,
                             const HashedNgramEmbedder& embedder) {
  if (embeddings) return load_repository(sentences, *embeddings);
  return embed_repository(read_sentences(sentences), embedder);
}

Loaded load(const RunSettings& run, bool need_repo) {
  const auto data_path = run.path("data");
  if (!data_path) throw Error(ErrorKind::kIncompleteInput, "--data is required");
  Loaded l;
  l.dataset = load_dataset(*data_path);
  l.embedder = HashedNgramEmbedder({run.embed_dim, 3, 0x5eed});
  std::optional<SentenceRepository> repo;
  if (const auto sentences = run.path("repo_sentences")) {
    repo = load_repo(*sentences, run.path("repo_embeddings"), l.embedder);
  } else if (need_repo) {
    throw Error(ErrorKind::kIncompleteInput, "this mode needs --repo-sentences");
  }
  l.data = prepare_experiment(l.dataset, repo ? &*repo : nullptr, l.embedder);
  return l;
}

void write_manifest_file(const fs::path& path, const std::string& command, const RunSettings& run) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << "command=" << command << '\n';
  write_manifest(out, run.config);
  out << "embed_dim=" << run.embed_dim << '\n';
  for (const auto& [key, value] : run.paths) out << key << '=' << value << '\n';
}

class MetricsWriter {
 public:
  explicit MetricsWriter(const fs::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  }
  void epoch(const EpochRecord& r) { out_ << to_json_line(r) << '\n' << std::flush; }
  void summary(const TrainResult& result, double test_accuracy) {
    nlohmann::json j;
    j["summary"] = true;
    j["best_epoch"] = result.best_epoch;
    j["best_dev_accuracy"] = result.best_dev_accuracy;
    j["test_accuracy"] = test_accuracy;
    j["epochs_run"] = result.records.size();
    out_ << j.dump() << '\n';
  }

 private:
  std::ofstream out_;
};

fs::path prepare_out_dir(const fs::path& dir) {
  fs::create_directories(dir);
  return dir;
}

MLPClassifier obtain_teacher(RunSettings& run, const Loaded& l, std::ostream& out) {
  if (const auto path = run.path("teacher")) {
    MLPClassifier teacher = load_checkpoint(*path);
    if (teacher.input_dim() != run.embed_dim || teacher.num_classes() != l.data.num_classes) {
      throw Error(ErrorKind::kIncompatibleModels,
                  "teacher expects " + std::to_string(teacher.input_dim()) + " inputs and " +
                      std::to_string(teacher.num_classes()) + " classes");
    }
    return teacher;
  }
  TrainResult t = train_teacher(l.data.train, l.data.dev, l.data.num_classes, run.config);
  const fs::path path = run.out_dir / "teacher.mdl";
  save_checkpoint(path, t.model);
  run.paths["teacher"] = path.string();
  out << "teacher best_epoch=" << t.best_epoch << " dev_accuracy=" << t.best_dev_accuracy
      << " test_accuracy=" << accuracy(t.model, l.data.test) << '\n';
  return std::move(t.model);
}

AugmentationPool make_pool(const RunSettings& run, const Loaded& l, const MLPClassifier& teacher) {
  if (!uses_augmentation(run.config.mode)) return {};
  return build_pool(l.data.train, l.data.train_queries, l.data.source(), teacher,
                    pool_options(run.config, run.config.mode == Mode::kRandomAug));
}

void cmd_train_teacher(const Command& cmd, std::ostream& out) {
  RunSettings run = cmd.resolve();
  const Loaded l = load(run, false);
  prepare_out_dir(run.out_dir);
  run.paths["teacher"] = (run.out_dir / "teacher.mdl").string();
  write_manifest_file(run.out_dir / "manifest.txt", "train-teacher", run);
  MetricsWriter metrics(run.out_dir / "metrics.jsonl");
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) { metrics.epoch(r); };
  const TrainResult t =
      train_teacher(l.data.train, l.data.dev, l.data.num_classes, run.config, hooks);
  const double test = accuracy(t.model, l.data.test);
  metrics.summary(t, test);
  save_checkpoint(run.out_dir / "teacher.mdl", t.model);
  out << "best_epoch=" << t.best_epoch << " dev_accuracy=" << t.best_dev_accuracy
      << " test_accuracy=" << test << '\n';
}

void cmd_distill(const Command& cmd, bool traces, std::ostream& out) {
  RunSettings run = cmd.resolve();
  const Loaded l = load(run, uses_augmentation(run.config.mode));
  prepare_out_dir(run.out_dir);
  const MLPClassifier teacher = obtain_teacher(run, l, out);
  const AugmentationPool pool = make_pool(run, l, teacher);
  write_manifest_file(run.out_dir / "manifest.txt", "distill", run);

  MetricsWriter metrics(run.out_dir / "metrics.jsonl");
  std::optional<SelectionTraceWriter> trace_writer;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) { metrics.epoch(r); };
  if (traces && run.config.mode == Mode::kMinimaxKnn) {
    trace_writer.emplace(run.out_dir / "traces.jsonl");
    hooks.traces = &*trace_writer;
  }
  const TrainResult s = distill(teacher, l.data.train, l.data.dev, pool, run.config, hooks);
  const double test = accuracy(s.model, l.data.test);
  metrics.summary(s, test);
  save_checkpoint(run.out_dir / "student.mdl", s.model);
  out << "mode=" << to_string(run.config.mode) << " best_epoch=" << s.best_epoch
      << " dev_accuracy=" << s.best_dev_accuracy << " test_accuracy=" << test << '\n';
}

void cmd_ablate(const Command& cmd, std::ostream& out) {
  RunSettings run = cmd.resolve();
  const Loaded l = load(run, true);
  prepare_out_dir(run.out_dir);
  const MLPClassifier teacher = obtain_teacher(run, l, out);
  write_manifest_file(run.out_dir / "manifest.txt", "ablate", run);
  const auto rows = run_ablation(l.data, teacher, ablation_grid(run.config));
  std::ofstream file(run.out_dir / "ablation.jsonl", std::ios::trunc);
  if (!file) throw Error(ErrorKind::kIo, "cannot write ablation.jsonl");
  out << std::fixed << std::setprecision(4);
  for (const auto& row : rows) {
    file << to_json_line(row) << '\n';
    out << row.row << '\t' << row.name << "\tdev=" << row.dev_accuracy
        << "\ttest=" << row.test_accuracy << "\taug_fwd=" << row.augmented_forward
        << "\taug_bwd=" << row.augmented_backward << '\n';
  }
}

void cmd_dist_report(const Command& cmd, std::size_t buckets, double threshold,
                     std::ostream& out) {
  RunSettings run = cmd.resolve();
  const Loaded l = load(run, true);
  prepare_out_dir(run.out_dir);
  const MLPClassifier teacher = obtain_teacher(run, l, out);
  write_manifest_file(run.out_dir / "manifest.txt", "dist-report", run);
  const AugmentationPool pool = build_pool(l.data.train, l.data.train_queries, l.data.source(),
                                           teacher, pool_options(run.config, false));
  const DistanceHistogram hist = distance_distribution(l.data.train, pool, teacher, buckets);
  for (const bool matched : {true, false}) {
    std::ofstream file(run.out_dir / (matched ? "hist_matched.txt" : "hist_mismatched.txt"));
    if (!file) throw Error(ErrorKind::kIo, "cannot write histogram");
    write_histogram_table(file, hist, matched);
  }
  std::size_t matched = 0, mismatched = 0;
  for (std::size_t c : hist.matched) matched += c;
  for (std::size_t c : hist.mismatched) mismatched += c;
  out << "matched=" << matched << '\n' << "mismatched=" << mismatched << '\n';
  out << "max_matched_distance=";
  if (hist.max_matched_distance) {
    out << *hist.max_matched_distance << '\n';
  } else {
    out << "none\n";
  }
  out << "overlap=" << mismatched_overlap(hist) << '\n'
      << "suggested_epsilon=" << suggest_epsilon(hist, threshold) << '\n';
}

void cmd_report(const fs::path& run_dir, const std::string& traces_path, std::size_t limit,
                const std::string& out_path, std::ostream& out) {
  RunSettings run;
  for (const auto& [key, value] : read_key_values(run_dir / "manifest.txt")) run.apply(key, value);
  run.out_dir = run_dir;
  const Loaded l = load(run, true);
  const auto teacher_path = run.path("teacher");
  if (!teacher_path) throw Error(ErrorKind::kIncompleteInput, "manifest names no teacher");
  const MLPClassifier teacher = load_checkpoint(*teacher_path);
  AugmentationPool pool = build_pool(l.data.train, l.data.train_queries, l.data.source(), teacher,
                                     pool_options(run.config, false));

  auto traces = read_selection_traces(traces_path.empty() ? run_dir / "traces.jsonl"
                                                          : fs::path(traces_path));
  if (limit > 0) {
    std::set<std::size_t> kept;
    std::vector<SelectionTrace> filtered;
    for (auto& t : traces) {
      if (kept.count(t.example_id) || kept.size() < limit) {
        kept.insert(t.example_id);
        filtered.push_back(std::move(t));
      }
    }
    traces = std::move(filtered);
  }
  std::map<std::size_t, std::string> texts;
  for (const auto& ex : l.dataset.train) texts.emplace(ex.id, ex.text);
  const auto rows = augmentation_report(l.data.train, pool, teacher, traces, texts);
  if (out_path.empty()) {
    write_report(out, rows, l.dataset.label_names);
  } else {
    std::ofstream file(out_path, std::ios::trunc);
    if (!file) throw Error(ErrorKind::kIo, "cannot write " + out_path);
    write_report(file, rows, l.dataset.label_names);
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"MiniMax-kNN knowledge distillation toolkit", "mmknn"};
  app.require_subcommand(1);
  std::function<void()> action;

  // build-index
  auto* build_index = app.add_subcommand("build-index", "normalize and store repository embeddings");
  std::string bi_sentences, bi_embeddings, bi_out;
  std::size_t bi_dim = kDefaultEmbedDim;
  bool bi_text = false;
  build_index->add_option("--sentences", bi_sentences, "repository sentences")->required();
  build_index->add_option("--embeddings", bi_embeddings, "input embeddings; embedded when absent");
  build_index->add_option("--embed-dim", bi_dim, "hashed embedder dimension");
  build_index->add_option("--out", bi_out, "output embedding file")->required();
  build_index->add_flag("--text", bi_text, "write the text format instead of EMB1");
  build_index->callback([&] {
    action = [&] {
      const HashedNgramEmbedder embedder({bi_dim, 3, 0x5eed});
      const auto repo = load_repo(bi_sentences,
                                  bi_embeddings.empty() ? std::nullopt
                                                        : std::optional<fs::path>(bi_embeddings),
                                  embedder);
      const FlatIndex index = FlatIndex::build(repo);
      if (bi_text) {
        write_embeddings_text(bi_out, index.embeddings());
      } else {
        write_embeddings_binary(bi_out, index.embeddings());
      }
      out << "rows=" << index.size() << " dim=" << index.dim() << '\n';
    };
  });

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "exact nearest neighbours of query sentences");
  std::string rt_sentences, rt_embeddings, rt_queries;
  std::vector<std::string> rt_query;
  std::size_t rt_k = 8, rt_dim = kDefaultEmbedDim;
  retrieve->add_option("--sentences", rt_sentences, "repository sentences")->required();
  retrieve->add_option("--embeddings", rt_embeddings, "repository embeddings");
  retrieve->add_option("--query", rt_query, "query sentence (repeatable)");
  retrieve->add_option("--queries", rt_queries, "file with one query per line");
  retrieve->add_option("--k", rt_k, "neighbours per query");
  retrieve->add_option("--embed-dim", rt_dim, "hashed embedder dimension");
  retrieve->callback([&] {
    action = [&] {
      const HashedNgramEmbedder embedder({rt_dim, 3, 0x5eed});
      const auto repo = load_repo(rt_sentences,
                                  rt_embeddings.empty() ? std::nullopt
                                                        : std::optional<fs::path>(rt_embeddings),
                                  embedder);
      const FlatIndex index = FlatIndex::build(repo);
      std::vector<std::string> queries = rt_query;
      if (!rt_queries.empty()) {
        for (auto& q : read_sentences(rt_queries)) queries.push_back(std::move(q));
      }
      if (queries.empty()) throw Error(ErrorKind::kIncompleteInput, "no queries given");
      for (std::size_t q = 0; q < queries.size(); ++q) {
        const auto embedded = embedder.embed(queries[q]);
        const NeighborSet hits = index.knn_query(embedded, rt_k, q);
        nlohmann::json j;
        j["query"] = queries[q];
        j["neighbors"] = nlohmann::json::array();
        for (const auto& c : hits.candidates) {
          j["neighbors"].push_back(
              {{"id", c.repo_id}, {"cosine", c.cosine}, {"text", repo.sentences[c.repo_id]}});
        }
        out << j.dump() << '\n';
      }
    };
  });

  Command train_teacher_cmd(app, "train-teacher", "train the teacher on the original data");
  train_teacher_cmd.training_settings();
  train_teacher_cmd.app()->callback([&] { action = [&] { cmd_train_teacher(train_teacher_cmd, out); }; });

  Command distill_cmd(app, "distill", "distill a student, optionally with augmentation");
  distill_cmd.training_settings();
  bool with_traces = false;
  distill_cmd.app()->add_flag("--traces", with_traces, "write minimax selection traces");
  distill_cmd.app()->callback([&] { action = [&] { cmd_distill(distill_cmd, with_traces, out); }; });

  Command ablate_cmd(app, "ablate", "run the nine-row ablation grid");
  ablate_cmd.training_settings();
  ablate_cmd.app()->callback([&] { action = [&] { cmd_ablate(ablate_cmd, out); }; });

  Command dist_cmd(app, "dist-report", "matched/mismatched teacher distance distribution");
  dist_cmd.training_settings();
  std::size_t dist_buckets = kDefaultBuckets;
  double dist_threshold = kDefaultOverlapThreshold;
  dist_cmd.app()->add_option("--buckets", dist_buckets, "histogram buckets");
  dist_cmd.app()->add_option("--overlap-threshold", dist_threshold,
                             "largest tolerated mismatched fraction below the matched maximum");
  dist_cmd.app()->callback([&] {
    action = [&] { cmd_dist_report(dist_cmd, dist_buckets, dist_threshold, out); };
  });

  // flops
  auto* flops = app.add_subcommand("flops", "augmentation cost model");
  CostParams cost;
  std::string fl_dims, fl_run, fl_baseline, fl_table;
  flops->add_option("--k1", cost.k1, "vanilla neighbours");
  flops->add_option("--k2", cost.k2, "minimax retrieved neighbours");
  flops->add_option("--n", cost.n, "minimax selected neighbours");
  flops->add_flag("--reforward", cost.reforward_selected, "selected neighbours are re-forwarded");
  flops->add_option("--forward", cost.forward, "F, FLOPs of one forward pass");
  flops->add_option("--backward", cost.backward, "B, FLOPs of one backward pass");
  flops->add_option("--sort", cost.sort, "S, FLOPs of one candidate sort");
  flops->add_option("--student-dims", fl_dims, "derive F, B and S from layer sizes, e.g. 64,8,3");
  flops->add_option("--run", fl_run, "metrics of the run to price");
  flops->add_option("--baseline", fl_baseline, "metrics of the baseline run");
  flops->add_option("--table", fl_table, "write the per-epoch table here");
  flops->callback([&] {
    action = [&] {
      if (!fl_dims.empty()) {
        DistillConfig scratch;
        apply_setting(scratch, "student_hidden", fl_dims);
        cost = calibrate(scratch.student_hidden, cost.k1, cost.k2, cost.n, cost.reforward_selected);
      }
      cost.validate();
      const DeltaFlops delta = delta_flops(cost);
      out << std::setprecision(10) << "F=" << cost.forward << "\nB=" << cost.backward
          << "\nS=" << cost.sort << "\nvanilla_flops=" << vanilla_flops(cost)
          << "\nminimax_flops=" << minimax_flops(cost) << "\ndelta_exact=" << delta.exact
          << "\ndelta_approx=" << delta.approx
          << "\nefficiency_condition=" << (efficiency_condition(cost) ? "true" : "false")
          << "\nsort_cost_negligible=" << (cost.sort_cost_negligible() ? "true" : "false")
          << '\n';
      if (fl_run.empty() != fl_baseline.empty()) {
        throw Error(ErrorKind::kComparison, "--run and --baseline go together");
      }
      if (!fl_run.empty()) {
        const auto run_records = read_metrics(fl_run);
        const auto base_records = read_metrics(fl_baseline);
        const FlopsReport report = measure_run(run_records, base_records, cost);
        report.write_text(out);
        if (!fl_table.empty()) {
          std::ofstream file(fl_table, std::ios::trunc);
          if (!file) throw Error(ErrorKind::kIo, "cannot write " + fl_table);
          report.write_table(file);
        }
      }
    };
  });

  // fewshot-sample
  auto* fewshot = app.add_subcommand("fewshot-sample", "balanced few-shot subset of a dataset");
  std::string fs_data, fs_out;
  std::size_t fs_per_label = 20, fs_dev_cap = 200;
  std::uint64_t fs_seed = 1;
  fewshot->add_option("--data", fs_data, "dataset directory or .jsonl file")->required();
  fewshot->add_option("--per-label", fs_per_label, "training examples per label");
  fewshot->add_option("--dev-cap", fs_dev_cap, "dev set size limit");
  fewshot->add_option("--seed", fs_seed, "sampling seed");
  fewshot->add_option("--out", fs_out, "output dataset directory")->required();
  fewshot->callback([&] {
    action = [&] {
      Dataset ds = load_dataset(fs_data);
      auto [train, dev] =
          few_shot_subsample(ds.train, ds.dev, ds.num_classes(), fs_per_label, fs_dev_cap, fs_seed);
      ds.train = std::move(train);
      ds.dev = std::move(dev);
      save_dataset(fs_out, ds);
      out << "train=" << ds.train.size() << " dev=" << ds.dev.size() << " test=" << ds.test.size()
          << '\n';
    };
  });

  // report
  auto* report = app.add_subcommand("report", "per-candidate augmentation report of a distill run");
  std::string rp_run, rp_traces, rp_out;
  std::size_t rp_limit = 0;
  report->add_option("--run", rp_run, "run directory written by distill --traces")->required();
  report->add_option("--traces", rp_traces, "trace file; defaults to <run>/traces.jsonl");
  report->add_option("--examples", rp_limit, "only the first N traced examples (0: all)");
  report->add_option("--out", rp_out, "write the report here instead of stdout");
  report->callback([&] { action = [&] { cmd_report(rp_run, rp_traces, rp_limit, rp_out, out); }; });

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic toy task");
  SyntheticOptions so;
  std::string sy_out;
  synth->add_option("--out", sy_out, "output directory")->required();
  synth->add_option("--classes", so.classes, "number of classes");
  synth->add_option("--train", so.train, "training examples");
  synth->add_option("--dev", so.dev, "dev examples");
  synth->add_option("--test", so.test, "test examples");
  synth->add_option("--repository", so.repository, "repository sentences");
  synth->add_option("--teacher-train", so.teacher_train,
                    "size of the larger teacher training set (0: none)");
  synth->add_option("--cue-rate", so.cue_rate, "probability of a word being a class cue");
  synth->add_option("--confuser-rate", so.confuser_rate, "probability of a word cueing another class");
  synth->add_option("--seed", so.seed, "generator seed");
  synth->callback([&] {
    action = [&] {
      const Dataset ds = make_synthetic_dataset(so);
      save_dataset(sy_out, ds);
      write_lines(fs::path(sy_out) / "repository.txt", make_synthetic_repository(so));
      if (so.teacher_train > 0) {
        Dataset teacher_ds = ds;
        teacher_ds.train = make_synthetic_teacher_set(so);
        save_dataset(fs::path(sy_out) / "teacher", teacher_ds);
      }
      out << "train=" << ds.train.size() << " dev=" << ds.dev.size() << " test=" << ds.test.size()
          << " repository=" << so.repository << '\n';
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }
  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mmknn::cli
