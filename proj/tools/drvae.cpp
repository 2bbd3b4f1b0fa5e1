#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "drvae/experiment.hpp"
#include "drvae/rng.hpp"
#include "drvae/textio.hpp"

namespace {

using namespace drvae;

constexpr int kExitOther = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIngestion = 3;
constexpr int kExitNumeric = 4;

// Relative output paths are placed under $DRVAE_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_out(const std::string& path) {
  std::filesystem::path p(path);
  const char* root = std::getenv("DRVAE_OUTPUT_ROOT");
  if (root && *root && p.is_relative()) return std::filesystem::path(root) / p;
  return p;
}

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "simu") return DatasetKind::Simu;
  if (name == "ihdp") return DatasetKind::Ihdp;
  if (name == "news") return DatasetKind::News;
  throw ConfigError("unknown dataset '" + name + "' (expected simu|ihdp|news)");
}

struct DataOpts {
  std::string dataset = "simu";
  int k = 1;
  std::string covariates;
  double train_fraction = 0.8;

  DatasetSpec spec() const {
    DatasetSpec s;
    s.kind = parse_dataset_kind(dataset);
    s.k = k;
    if (!covariates.empty()) s.covariates = covariates;
    s.train_fraction = train_fraction;
    return s;
  }
};

void add_data_options(CLI::App* cmd, DataOpts& d) {
  cmd->add_option("--dataset", d.dataset, "Dataset family: simu|ihdp|news")
      ->capture_default_str();
  cmd->add_option("--k", d.k, "Noise scale index for simu (1..5)")
      ->capture_default_str();
  cmd->add_option("--covariates", d.covariates,
                  "Covariate CSV for ihdp/news (synthesized when omitted)");
  cmd->add_option("--train-fraction", d.train_fraction,
                  "Train fraction for ihdp/news splits")
      ->capture_default_str();
}

struct TrainOpts {
  std::optional<int> hidden, layers, epochs, batch;
  std::optional<double> lr, weight_decay;
  std::optional<double> alpha, beta, gamma, delta, lambda;
  int d_gamma = 1, d_delta = 1, d_upsilon = 1, d_e = 1;

  TrainConfig resolve(DatasetKind kind) const {
    TrainConfig cfg = default_train_config(kind);
    if (hidden) cfg.hidden_dim = *hidden;
    if (layers) cfg.num_layers = *layers;
    if (epochs) cfg.epochs = *epochs;
    if (batch) cfg.batch_size = *batch;
    if (lr) cfg.learning_rate = *lr;
    if (weight_decay) cfg.weight_decay = *weight_decay;
    if (alpha) cfg.weights.alpha = *alpha;
    if (beta) cfg.weights.beta = *beta;
    if (gamma) cfg.weights.gamma = *gamma;
    if (delta) cfg.weights.delta = *delta;
    if (lambda) cfg.weights.lambda = *lambda;
    return cfg;
  }

  LatentConfig latent(const TrainConfig& train) const {
    LatentConfig lc;
    lc.d_gamma = d_gamma;
    lc.d_delta = d_delta;
    lc.d_upsilon = d_upsilon;
    lc.d_e = d_e;
    lc.hidden_dim = train.hidden_dim;
    lc.num_layers = train.num_layers;
    return lc;
  }
};

void add_train_options(CLI::App* cmd, TrainOpts& t) {
  cmd->add_option("--hidden", t.hidden, "Hidden layer width");
  cmd->add_option("--layers", t.layers, "Hidden layer count");
  cmd->add_option("--epochs", t.epochs, "Training epochs");
  cmd->add_option("--batch", t.batch, "Minibatch size");
  cmd->add_option("--lr", t.lr, "Adam learning rate");
  cmd->add_option("--weight-decay", t.weight_decay, "L2 weight decay");
  cmd->add_option("--alpha", t.alpha, "Covariate reconstruction weight");
  cmd->add_option("--beta", t.beta, "Posterior KL weight");
  cmd->add_option("--gamma", t.gamma, "Treatment likelihood weight");
  cmd->add_option("--delta", t.delta, "Outcome likelihood weight");
  cmd->add_option("--lambda", t.lambda, "Prior alignment weight");
  cmd->add_option("--d-gamma", t.d_gamma, "Instrumental factor dimension")
      ->capture_default_str();
  cmd->add_option("--d-delta", t.d_delta, "Confounding factor dimension")
      ->capture_default_str();
  cmd->add_option("--d-upsilon", t.d_upsilon, "Adjustment factor dimension")
      ->capture_default_str();
  cmd->add_option("--d-e", t.d_e, "External noise factor dimension")
      ->capture_default_str();
}

void write_manifest(const Dataset& ds, const std::filesystem::path& data_path) {
  nlohmann::json j;
  j["format"] = "drvae-dataset";
  j["version"] = 1;
  j["dataset"] = ds.generator.name;
  j["k"] = ds.generator.k;
  j["seed"] = ds.generator.seed;
  j["n"] = ds.n();
  j["p"] = ds.p();
  j["train_fraction"] = ds.generator.train_fraction;
  j["synthetic_covariates"] = ds.generator.synthetic_covariates;
  j["path"] = data_path.filename().string();
  std::filesystem::path mpath = data_path;
  mpath += ".manifest.json";
  write_file_atomic(mpath, j.dump(2) + "\n");
}

void print_report(const MetricsReport& r) {
  auto line = [&](const char* name, const MetricStats& s) {
    std::cout << name << ": mean " << format_double(s.mean);
    if (r.has_std) std::cout << " std " << format_double(s.std);
    std::cout << " (n_seeds " << r.n_seeds << ")\n";
  };
  line("amse", r.amse);
  line("sqrt_mise", r.sqrt_mise);
  line("sqrt_dpe", r.sqrt_dpe);
  line("i_mse", r.i_mse);
}

void report_failures(const ExperimentResult& result) {
  if (result.all_ok) return;
  std::string failed;
  for (const SeedRunResult& s : result.seeds) {
    if (s.failed) failed += " " + std::to_string(s.seed);
  }
  throw NumericError("failed seeds:" + failed + " (partial report written)");
}

int run_cli(int argc, char** argv) {
  CLI::App app{"DRVAE dose-response experiment harness"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file ([subcommand] sections)");

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a benchmark dataset");
  auto gen_data = std::make_shared<DataOpts>();
  auto gen_seed = std::make_shared<std::uint64_t>(0);
  auto gen_out = std::make_shared<std::string>("dataset.ds");
  add_data_options(gen, *gen_data);
  gen->add_option("--seed", *gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", *gen_out, "Output dataset file")->capture_default_str();
  gen->callback([gen_data, gen_seed, gen_out]() {
    const Dataset ds = generate_dataset(gen_data->spec(), *gen_seed);
    const auto path = resolve_out(*gen_out);
    save_dataset(ds, path);
    write_manifest(ds, path);
    std::cout << "wrote " << path.string() << " (" << ds.n() << " rows, " << ds.p()
              << " columns)\n";
  });

  // train
  auto* train = app.add_subcommand("train", "Train a model on a dataset file");
  auto train_opts = std::make_shared<TrainOpts>();
  auto train_data = std::make_shared<std::string>();
  auto train_seed = std::make_shared<std::uint64_t>(0);
  auto train_out = std::make_shared<std::string>("out");
  train->add_option("--data", *train_data, "Dataset file")->required();
  train->add_option("--seed", *train_seed, "Run seed")->capture_default_str();
  train->add_option("--out", *train_out, "Output directory")->capture_default_str();
  add_train_options(train, *train_opts);
  train->callback([train_opts, train_data, train_seed, train_out]() {
    const Dataset ds = load_dataset(*train_data);
    const TrainConfig cfg = train_opts->resolve(parse_dataset_kind(ds.generator.name));
    const LatentConfig lc = train_opts->latent(cfg);
    Rng init_rng = make_rng(*train_seed, "init");
    DrvaeModel model(ds.column_kind, lc, init_rng);
    Rng train_rng = make_rng(*train_seed, "train");
    const TrainResult result = train_model(model, ds, cfg, train_rng);
    const auto out = resolve_out(*train_out);
    std::filesystem::create_directories(out);
    model.save(out / "model.ckpt");
    write_train_log(result.log, out / "train_log.tsv");
    std::cout << "trained " << cfg.epochs << " epochs; final objective "
              << format_double(result.log.back().mean.total) << "\n";
  });

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
  auto eval_ckpt = std::make_shared<std::string>();
  auto eval_data = std::make_shared<std::string>();
  auto eval_seed = std::make_shared<std::uint64_t>(0);
  auto eval_l = std::make_shared<int>(20);
  auto eval_out = std::make_shared<std::string>("out");
  auto eval_oracle = std::make_shared<bool>(false);
  eval->add_option("--checkpoint", *eval_ckpt, "Model checkpoint")->required();
  eval->add_option("--data", *eval_data, "Dataset file")->required();
  eval->add_option("--seed", *eval_seed, "Sampling seed")->capture_default_str();
  eval->add_option("--l", *eval_l, "Posterior samples per prediction")
      ->capture_default_str();
  eval->add_option("--out", *eval_out, "Output directory")->capture_default_str();
  eval->add_flag("--oracle-predictor", *eval_oracle,
                 "Score the noiseless oracle against itself (plumbing check)");
  eval->callback([eval_ckpt, eval_data, eval_seed, eval_l, eval_out, eval_oracle]() {
    const Dataset ds = load_dataset(*eval_data);
    const DrvaeModel model = DrvaeModel::load(*eval_ckpt);
    if (model.schema() != ds.column_kind) {
      throw IngestionError("schema mismatch: checkpoint '" +
                           column_kind_string(model.schema()) + "' vs dataset '" +
                           column_kind_string(ds.column_kind) + "'");
    }
    Rng rng = make_rng(*eval_seed, "eval");
    const auto out = resolve_out(*eval_out);
    std::filesystem::create_directories(out);
    const SeedMetrics m = evaluate_model(model, ds, *eval_l, rng, out, *eval_oracle);
    std::cout << "amse " << format_double(m.amse) << "  sqrt_mise "
              << format_double(m.sqrt_mise) << "  sqrt_dpe "
              << format_double(m.sqrt_dpe) << "  i_mse " << format_double(m.i_mse)
              << "\n";
  });

  // experiment
  auto* exp = app.add_subcommand("experiment", "Multi-seed generate/train/evaluate");
  auto exp_data = std::make_shared<DataOpts>();
  auto exp_train = std::make_shared<TrainOpts>();
  auto exp_seeds = std::make_shared<int>(10);
  auto exp_base_seed = std::make_shared<std::uint64_t>(0);
  auto exp_l = std::make_shared<int>(20);
  auto exp_jobs = std::make_shared<int>(1);
  auto exp_out = std::make_shared<std::string>("out");
  add_data_options(exp, *exp_data);
  add_train_options(exp, *exp_train);
  exp->add_option("--seeds", *exp_seeds, "Number of repetitions")
      ->capture_default_str();
  exp->add_option("--base-seed", *exp_base_seed, "First seed (runs use base..base+n-1)")
      ->capture_default_str();
  exp->add_option("--l", *exp_l, "Posterior samples per prediction")
      ->capture_default_str();
  exp->add_option("--jobs", *exp_jobs, "Concurrent seed runs")->capture_default_str();
  exp->add_option("--out", *exp_out, "Output directory")->capture_default_str();
  auto build_experiment_config = [](const DataOpts& d, const TrainOpts& t, int seeds,
                                    std::uint64_t base_seed, int l, int jobs,
                                    const std::string& out) {
    ExperimentConfig cfg;
    cfg.data = d.spec();
    cfg.train = t.resolve(cfg.data.kind);
    cfg.latent = t.latent(cfg.train);
    cfg.n_seeds = seeds;
    cfg.base_seed = base_seed;
    cfg.l = l;
    cfg.jobs = jobs;
    cfg.out_dir = resolve_out(out);
    return cfg;
  };
  exp->callback([=]() {
    const ExperimentConfig cfg = build_experiment_config(
        *exp_data, *exp_train, *exp_seeds, *exp_base_seed, *exp_l, *exp_jobs, *exp_out);
    const ExperimentResult result = run_experiment(cfg);
    if (result.seeds.size() != static_cast<std::size_t>(0) &&
        !result.seeds.empty() && result.report.n_seeds > 0) {
      print_report(result.report);
    }
    std::cout << "report written to " << (cfg.out_dir / "report.tsv").string() << "\n";
    report_failures(result);
  });

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Repeat an experiment over one parameter");
  auto sweep_data = std::make_shared<DataOpts>();
  auto sweep_train = std::make_shared<TrainOpts>();
  auto sweep_seeds = std::make_shared<int>(10);
  auto sweep_base_seed = std::make_shared<std::uint64_t>(0);
  auto sweep_l = std::make_shared<int>(20);
  auto sweep_jobs = std::make_shared<int>(1);
  auto sweep_out = std::make_shared<std::string>("out");
  auto sweep_param = std::make_shared<std::string>();
  auto sweep_values = std::make_shared<std::vector<double>>();
  add_data_options(sweep, *sweep_data);
  add_train_options(sweep, *sweep_train);
  sweep->add_option("--seeds", *sweep_seeds, "Repetitions per sweep point")
      ->capture_default_str();
  sweep->add_option("--base-seed", *sweep_base_seed, "First seed")
      ->capture_default_str();
  sweep->add_option("--l", *sweep_l, "Posterior samples per prediction")
      ->capture_default_str();
  sweep->add_option("--jobs", *sweep_jobs, "Concurrent seed runs")
      ->capture_default_str();
  sweep->add_option("--out", *sweep_out, "Output directory")->capture_default_str();
  sweep->add_option("--parameter", *sweep_param,
                    "alpha|beta|gamma|delta|lambda|d_gamma|d_delta|d_upsilon|d_e")
      ->required();
  sweep->add_option("--values", *sweep_values, "Comma-separated sweep values")
      ->delimiter(',');
  sweep->callback([=]() {
    ExperimentConfig base = build_experiment_config(
        *sweep_data, *sweep_train, *sweep_seeds, *sweep_base_seed, *sweep_l,
        *sweep_jobs, *sweep_out);
    std::string param = *sweep_param;
    for (char& c : param) {
      if (c == '-') c = '_';
    }
    const auto points = run_sweep(base, param, *sweep_values);
    bool any_failed = false;
    for (const SweepPoint& p : points) {
      std::cout << param << "=" << format_double(p.value) << "  amse "
                << format_double(p.result.report.amse.mean) << "\n";
      any_failed = any_failed || !p.result.all_ok;
    }
    std::cout << "sweep table written to " << (base.out_dir / "sweep.tsv").string()
              << "\n";
    if (any_failed) throw NumericError("some sweep seeds failed; see seeds.tsv files");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const drvae::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const drvae::IngestionError& e) {
    std::cerr << "ingestion error: " << e.what() << "\n";
    return kExitIngestion;
  } catch (const drvae::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}
