// szo: training, evaluation, theory checks and synthetic data for sparse
// zeroth-order bandit structured prediction.
//
// Exit codes: 0 ok, 1 bound violated (check-theory), 2 bad configuration,
// 3 bad data or I/O, 4 numerical abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "szo/chunking.hpp"
#include "szo/data_io.hpp"
#include "szo/errors.hpp"
#include "szo/metrics.hpp"
#include "szo/objectives.hpp"
#include "szo/optimizer.hpp"
#include "szo/synth_data.hpp"
#include "szo/tasks.hpp"
#include "szo/theory_check.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kViolation = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct SynthOptions {
  std::string fn = "l1_well";
  std::uint32_t n = 512;
  std::uint32_t nbar = 8;
  std::string layout = "fixed";
};

struct TrainOptions {
  std::string task = "synth";
  std::string rule = "two-point";
  std::string mode = "sparse";
  double h = 0.01;
  double mu = 0.01;
  std::uint64_t iters = 1000;
  std::uint64_t eval_every = 1000;
  std::uint64_t seed = 1;
  std::string train, dev, out;
  std::string objective = "map";
  double gamma = std::numeric_limits<double>::infinity();
  std::size_t k = 20;
  bool lenient = false;
  SynthOptions synth;
};

void add_synth_flags(CLI::App* app, SynthOptions& s) {
  app->add_option("--fn", s.fn, "synthetic function: l1_well, smooth_bowl, nonconvex_ripple");
  app->add_option("--n", s.n, "ambient dimension");
  app->add_option("--nbar", s.nbar, "active coordinates per sample");
  app->add_option("--layout", s.layout, "active-set layout: fixed or scattered");
}

szo::SyntheticFunction make_function(const SynthOptions& s, std::uint64_t seed) {
  return szo::SyntheticFunction(szo::parse_synthetic_kind(s.fn), s.n, s.nbar, seed,
                                szo::parse_support_layout(s.layout));
}

szo::ObjectiveSpec make_objective(const std::string& name, double gamma) {
  if (name == "map") return {szo::ObjectiveKind::kMapLoss, gamma};
  if (name == "annealed") return {szo::ObjectiveKind::kAnnealedLoss, gamma};
  throw szo::ConfigError("--objective: expected map or annealed, got `" + name + "`");
}

szo::RunConfig make_config(const TrainOptions& o) {
  szo::RunConfig c;
  c.rule = szo::parse_update_rule(o.rule);
  c.mode = szo::parse_perturbation_mode(o.mode);
  c.h = o.h;
  c.mu = o.mu;
  c.max_iters = o.iters;
  c.eval_every = o.eval_every;
  c.seed = o.seed;
  c.objective = o.task == "synth" ? szo::ObjectiveSpec{szo::ObjectiveKind::kSynthetic, o.gamma}
                                  : make_objective(o.objective, o.gamma);
  c.validate();
  return c;
}

const std::string& require_path(const std::string& value, const char* flag, const std::string& task) {
  if (value.empty()) throw szo::ConfigError(std::string(flag) + " is required for --task " + task);
  return value;
}

void warn_all(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

std::vector<szo::SequenceInstance> load_conll(const std::string& path, bool lenient) {
  auto r = szo::parse_conll(path, lenient ? szo::ParseMode::kLenient : szo::ParseMode::kStrict);
  warn_all(r.warnings);
  return std::move(r.items);
}

szo::NBestData load_nbest(const std::string& path) {
  auto r = szo::parse_nbest(path);
  warn_all(r.warnings);
  return std::move(r.items);
}

std::vector<szo::Instance> load_docs(const std::string& path) {
  auto r = szo::parse_docs(path);
  warn_all(r.warnings);
  return std::move(r.items);
}

void write_outputs(const szo::RunResult& res, const std::string& out,
                   const szo::FeatureIndex* features) {
  fs::create_directories(out);
  szo::write_runlog(res.log, (fs::path(out) / "runlog.csv").string());
  szo::write_checkpoint(res.best_checkpoint ? *res.best_checkpoint : res.final_weights,
                        (fs::path(out) / "model.txt").string());
  szo::write_checkpoint(res.final_weights, (fs::path(out) / "final.txt").string());
  if (features) {
    std::ofstream f(fs::path(out) / "features.txt");
    if (!f) throw szo::DataError("cannot write features.txt under `" + out + "`");
    szo::write_features(*features, f);
  }
}

template <class Problem>
szo::RunResult run_and_report(const szo::RunConfig& cfg, const Problem& problem) {
  auto res = szo::run(cfg, problem);
  warn_all(res.warnings);
  const auto& last = res.log.rows.back();
  std::cerr << "iters=" << last.iter << " avg_cum_loss=" << szo::format_double(last.avg_cum_loss);
  if (res.best_dev) {
    std::cerr << " best_dev=" << szo::format_double(*res.best_dev) << " at " << *res.best_iter;
  }
  std::cerr << '\n';
  return res;
}

int cmd_train(const TrainOptions& o) {
  const szo::RunConfig cfg = make_config(o);
  if (o.out.empty()) throw szo::ConfigError("--out is required");
  if (o.task == "synth") {
    szo::SyntheticProblem problem(make_function(o.synth, o.seed));
    write_outputs(run_and_report(cfg, problem), o.out, nullptr);
  } else if (o.task == "chunking") {
    auto train = load_conll(require_path(o.train, "--train", o.task), o.lenient);
    std::vector<szo::SequenceInstance> dev;
    if (!o.dev.empty()) dev = load_conll(o.dev, o.lenient);
    szo::ChunkingProblem problem(std::move(train), std::move(dev), o.k, cfg.objective);
    write_outputs(run_and_report(cfg, problem), o.out, problem.features().get());
  } else if (o.task == "rerank") {
    auto train = load_nbest(require_path(o.train, "--train", o.task));
    szo::InstanceProblem::DevMetric metric;
    std::shared_ptr<szo::NBestData> dev;
    if (!o.dev.empty()) {
      dev = std::make_shared<szo::NBestData>(load_nbest(o.dev));
      if (!dev->instances.empty()) {
        metric = [dev](std::span<const double> w) {
          return szo::rerank_bleu(w, dev->instances, dev->references);
        };
      }
    }
    szo::InstanceProblem problem(std::move(train.instances), cfg.objective, metric, true);
    write_outputs(run_and_report(cfg, problem), o.out, nullptr);
  } else if (o.task == "multiclass") {
    auto train = load_docs(require_path(o.train, "--train", o.task));
    szo::InstanceProblem::DevMetric metric;
    if (!o.dev.empty()) {
      auto dev = std::make_shared<std::vector<szo::Instance>>(load_docs(o.dev));
      if (!dev->empty()) {
        metric = [dev](std::span<const double> w) { return szo::multiclass_accuracy(w, *dev); };
      }
    }
    szo::InstanceProblem problem(std::move(train), cfg.objective, metric, true);
    write_outputs(run_and_report(cfg, problem), o.out, nullptr);
  } else {
    throw szo::ConfigError("--task: expected chunking, rerank, multiclass or synth, got `" + o.task + "`");
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string task;
  std::string model;
  std::string test;
  std::string features;
  bool lenient = false;
  std::uint64_t seed = 1;
  SynthOptions synth;
};

void print_metric(const char* name, double v) { std::printf("%s=%.4f\n", name, v); }

int cmd_eval(const EvalOptions& o) {
  if (o.model.empty()) throw szo::ConfigError("--model is required");
  const szo::SparseVector w = szo::read_checkpoint(o.model);
  if (o.task == "chunking") {
    const fs::path fpath =
        o.features.empty() ? fs::path(o.model).parent_path() / "features.txt" : fs::path(o.features);
    std::ifstream fin(fpath);
    if (!fin) throw szo::DataError("cannot open feature registry `" + fpath.string() + "`");
    szo::FeatureIndex registry = szo::read_features(fin);
    if (registry.size() != w.dim()) {
      throw szo::DataError("model dimension " + std::to_string(w.dim()) + " does not match " +
                           std::to_string(registry.size()) + " registered features");
    }
    const auto test = load_conll(require_path(o.test, "--test", o.task), o.lenient);
    if (test.empty()) throw szo::DataError("test file `" + o.test + "` has no sentences");
    print_metric("f1", szo::evaluate_chunking(w, registry, test));
  } else if (o.task == "rerank") {
    const auto test = load_nbest(require_path(o.test, "--test", o.task));
    if (test.instances.empty()) throw szo::DataError("test file `" + o.test + "` has no entries");
    if (test.instances.front().dim() != w.dim()) throw szo::DataError("model dimension does not match the features");
    print_metric("bleu", szo::rerank_bleu(w, test.instances, test.references));
  } else if (o.task == "multiclass") {
    const auto test = load_docs(require_path(o.test, "--test", o.task));
    if (test.empty()) throw szo::DataError("test file `" + o.test + "` has no documents");
    if (test.front().dim() != w.dim()) throw szo::DataError("model dimension does not match the features");
    print_metric("accuracy", szo::multiclass_accuracy(w, test));
  } else if (o.task == "synth") {
    szo::SyntheticProblem problem(make_function(o.synth, o.seed));
    if (w.dim() != problem.dimension()) throw szo::DataError("model dimension does not match --n");
    const auto dense = w.to_dense();
    print_metric("loss", problem.evaluate(dense));
  } else {
    throw szo::ConfigError("--task: expected chunking, rerank, multiclass or synth, got `" + o.task + "`");
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct CheckOptions {
  std::string check;
  std::vector<std::size_t> dims{1, 5, 10, 50, 200};
  std::vector<int> p{2, 4};
  std::size_t samples = 100'000;
  std::size_t grad_samples = 10'000;
  double mu = 0.05;
  double h = 0.01;
  std::uint64_t iters = 10'000;
  std::uint64_t seed = 1;
  std::string rule = "two-point";
  std::string mode = "sparse";
  std::vector<std::uint32_t> nbar_list{8, 32, 128, 512};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::optional<double> epsilon;
  std::uint64_t cap = 20'000;
  std::string out;
  SynthOptions synth{"l1_well", 32, 8, "fixed"};
};

class JsonSink {
 public:
  explicit JsonSink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw szo::DataError("cannot open `" + path + "` for writing");
    }
  }
  void write(const nlohmann::json& j) {
    (file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout) << j.dump() << '\n';
  }

 private:
  std::ofstream file_;
};

szo::RunConfig check_config(const CheckOptions& o) {
  szo::RunConfig c;
  c.rule = szo::parse_update_rule(o.rule);
  if (c.rule == szo::UpdateRule::kSfo) throw szo::ConfigError("--rule: sfo has no synthetic counterpart");
  c.mode = szo::parse_perturbation_mode(o.mode);
  c.h = o.h;
  c.mu = o.mu;
  c.max_iters = o.iters;
  c.eval_every = o.iters;
  c.seed = o.seed;
  c.objective = {szo::ObjectiveKind::kSynthetic};
  c.validate();
  return c;
}

// Monotone medians, and not every cell done before the first step.
bool sweep_passes(const szo::SweepResult& r) {
  if (r.rows.empty() || r.rows.back().median == 0) return false;
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    if (r.rows[i].median < r.rows[i - 1].median) return false;
  }
  return true;
}

szo::SweepResult run_sweep(const CheckOptions& o) {
  szo::RunConfig base = check_config(o);
  szo::SweepOptions opt;
  opt.kind = szo::parse_synthetic_kind(o.synth.fn);
  opt.layout = szo::parse_support_layout(o.synth.layout);
  opt.cap = o.cap;
  opt.grad_samples = o.grad_samples;
  return szo::complexity_sweep(o.synth.n, o.nbar_list, o.epsilon, o.seeds, base, opt);
}

int cmd_check(const CheckOptions& o) {
  JsonSink sink(o.out);
  bool all = true;
  if (o.check == "lemma2") {
    szo::RngStream rng(o.seed, szo::streams::kCheck);
    for (std::size_t d : o.dims) {
      for (int p : o.p) {
        auto s = rng.substream(d * 8 + static_cast<std::uint64_t>(p));
        const auto r = szo::moment_bound_check(d, p, o.samples, s);
        sink.write(szo::to_json(r));
        all = all && r.pass;
      }
    }
  } else if (o.check == "lemma1") {
    const auto f = make_function(o.synth, o.seed);
    std::vector<double> w(f.dimension(), 0.0);
    szo::RngStream rng(o.seed, szo::streams::kCheck);
    const auto r = szo::estimator_bias_check(f, w, o.mu, o.samples, rng);
    sink.write(szo::to_json(r));
    all = r.pass;
  } else if (o.check == "second-moment") {
    const auto f = make_function(o.synth, o.seed);
    std::vector<double> w(f.dimension(), 0.0);
    szo::RngStream rng(o.seed, szo::streams::kCheck);
    const auto r = szo::second_moment_check(f, w, o.mu, o.samples, f.lipschitz(), f.active_dim(), rng);
    sink.write(szo::to_json(r));
    all = r.pass;
  } else if (o.check == "theorem1") {
    const auto cfg = check_config(o);
    const auto f = make_function(o.synth, o.seed);
    szo::SyntheticProblem problem(f, 0);
    szo::Theorem1Tracker tracker(cfg.max_iters);
    szo::run(cfg, problem, tracker.hooks());
    szo::RngStream rng(o.seed, szo::streams::kCheck);
    const auto r = tracker.report(f, f.lipschitz(), f.lower_bound(), f.active_dim(), cfg.mu,
                                  o.grad_samples, rng);
    sink.write(szo::to_json(r));
    all = r.pass;
  } else if (o.check == "sweep") {
    const auto r = run_sweep(o);
    auto j = szo::to_json(r);
    all = sweep_passes(r);
    j["pass"] = all;
    sink.write(j);
  } else {
    throw szo::ConfigError("--check: expected lemma1, lemma2, theorem1, second-moment or sweep, got `" +
                           o.check + "`");
  }
  return all ? kOk : kViolation;
}

int cmd_sweep(const CheckOptions& o) {
  JsonSink sink(o.out);
  const auto r = run_sweep(o);
  auto j = szo::to_json(r);
  j["pass"] = sweep_passes(r);
  sink.write(j);
  return kOk;
}

// ---------------------------------------------------------------------------

struct SynthDataOptions {
  std::string task;
  std::size_t size = 100;
  std::uint64_t seed = 1;
  std::string out;
  std::size_t candidates = 10;
  std::size_t classes = 4;
  std::size_t vocab = 2000;
};

int cmd_synth_data(const SynthDataOptions& o) {
  if (o.out.empty()) throw szo::ConfigError("--out is required");
  std::ostringstream buf;
  if (o.task == "chunking") {
    szo::write_synthetic_chunking(buf, o.size, o.seed);
  } else if (o.task == "rerank") {
    szo::write_synthetic_nbest(buf, o.size, o.seed, o.candidates);
  } else if (o.task == "multiclass") {
    szo::write_synthetic_docs(buf, o.size, o.seed, o.classes, o.vocab);
  } else {
    throw szo::ConfigError("--task: expected chunking, rerank or multiclass, got `" + o.task + "`");
  }
  if (const auto parent = fs::path(o.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(o.out, std::ios::binary);
  if (!out) throw szo::DataError("cannot open `" + o.out + "` for writing");
  out << buf.str();
  return kOk;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const szo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const szo::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const szo::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse zeroth-order optimization for bandit structured prediction"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI file with one [subcommand] section of key = value lines; flags given on the command line win");

  TrainOptions tr;
  auto* train = app.add_subcommand("train", "run SZO-SP or SFO training");
  train->add_option("--task", tr.task, "chunking, rerank, multiclass or synth");
  train->add_option("--rule", tr.rule, "two-point, func-cmp, baseline or sfo");
  train->add_option("--mode", tr.mode, "perturb all coordinates or only the active ones: all, sparse");
  train->add_option("--h", tr.h, "constant learning rate");
  train->add_option("--mu", tr.mu, "smoothing / exploration parameter");
  train->add_option("--iters", tr.iters, "number of iterations");
  train->add_option("--eval-every", tr.eval_every, "dev evaluation period");
  train->add_option("--seed", tr.seed, "random seed");
  train->add_option("--train", tr.train, "training data file");
  train->add_option("--dev", tr.dev, "development data file");
  train->add_option("--out", tr.out, "output directory");
  train->add_option("--objective", tr.objective, "map or annealed");
  train->add_option("--gamma", tr.gamma, "annealing temperature");
  train->add_option("--k", tr.k, "k-best list size for chunking");
  train->add_flag("--lenient", tr.lenient, "skip malformed CoNLL sentences instead of failing");
  add_synth_flags(train, tr.synth);

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on test data");
  eval->add_option("--task", ev.task, "chunking, rerank, multiclass or synth")->required();
  eval->add_option("--model", ev.model, "checkpoint file")->required();
  eval->add_option("--test", ev.test, "test data file");
  eval->add_option("--features", ev.features, "feature registry (chunking; default: next to the model)");
  eval->add_option("--seed", ev.seed, "synthetic function seed");
  eval->add_flag("--lenient", ev.lenient, "skip malformed CoNLL sentences instead of failing");
  add_synth_flags(eval, ev.synth);

  CheckOptions ck;
  auto* check = app.add_subcommand("check-theory", "empirical checks of the convergence analysis");
  auto* sweep = app.add_subcommand("sweep", "iterations-to-epsilon over effective dimensions");
  for (auto* sub : {check, sweep}) {
      sub->add_option("--samples", ck.samples, "Monte Carlo samples");
    sub->add_option("--grad-samples", ck.grad_samples, "samples per smoothed-gradient estimate");
    sub->add_option("--mu", ck.mu, "smoothing parameter");
    sub->add_option("--h", ck.h, "learning rate");
    sub->add_option("--iters", ck.iters, "iterations for theorem1");
    sub->add_option("--seed", ck.seed, "random seed");
    sub->add_option("--rule", ck.rule, "two-point, func-cmp or baseline");
    sub->add_option("--mode", ck.mode, "all or sparse");
    sub->add_option("--nbar-list", ck.nbar_list, "effective dimensions for the sweep")->delimiter(',');
    sub->add_option("--seeds", ck.seeds, "seeds for the sweep")->delimiter(',');
    sub->add_option("--epsilon", ck.epsilon, "target ||grad f_mu||^2 (default: calibrated)");
    sub->add_option("--cap", ck.cap, "iteration cap per sweep cell");
    sub->add_option("--out", ck.out, "JSON-lines output file (default: stdout)");
    add_synth_flags(sub, ck.synth);
  }
  check->add_option("--check", ck.check, "lemma1, lemma2, theorem1, second-moment or sweep")->required();
  check->add_option("--dims", ck.dims, "dimensions for lemma2")->delimiter(',');
  check->add_option("--p", ck.p, "moment orders for lemma2")->delimiter(',');

  SynthDataOptions sd;
  auto* synth = app.add_subcommand("synth-data", "write a deterministic synthetic dataset");
  synth->add_option("--task", sd.task, "chunking, rerank or multiclass")->required();
  synth->add_option("--size", sd.size, "sentences, n-best ids or documents");
  synth->add_option("--seed", sd.seed, "random seed");
  synth->add_option("--out", sd.out, "output file")->required();
  synth->add_option("--candidates", sd.candidates, "hypotheses per id (rerank)");
  synth->add_option("--classes", sd.classes, "number of classes (multiclass)");
  synth->add_option("--vocab", sd.vocab, "vocabulary size (multiclass)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (*train) return guarded([&] { return cmd_train(tr); });
  if (*eval) return guarded([&] { return cmd_eval(ev); });
  if (*check) return guarded([&] { return cmd_check(ck); });
  if (*sweep) return guarded([&] { return cmd_sweep(ck); });
  if (*synth) return guarded([&] { return cmd_synth_data(sd); });
  return kConfig;
}
