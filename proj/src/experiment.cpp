#include "drvae/experiment.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "drvae/rng.hpp"
#include "drvae/textio.hpp"

namespace drvae {

namespace {

// Stream tags separating the rng consumers that hang off one seed.
std::uint64_t stream_id(const char* purpose) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (const char* c = purpose; *c; ++c) {
    h ^= static_cast<std::uint64_t>(*c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

Rng make_rng(std::uint64_t seed, const char* purpose) {
  return Rng(seed, stream_id(purpose));
}

std::string dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Simu: return "simu";
    case DatasetKind::Ihdp: return "ihdp";
    case DatasetKind::News: return "news";
  }
  throw ContractError("unknown dataset kind");
}

TrainConfig default_train_config(DatasetKind kind) {
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.weight_decay = 1e-4;
  cfg.num_layers = 3;
  cfg.weights = {0.1, 1.0, 1.0, 0.1, 1.0};
  switch (kind) {
    case DatasetKind::Simu:
      cfg.hidden_dim = 128;
      cfg.epochs = 100;
      cfg.batch_size = 64;
      cfg.weights.delta = 0.1;
      break;
    case DatasetKind::Ihdp:
      cfg.hidden_dim = 100;
      cfg.epochs = 100;
      cfg.batch_size = 64;
      cfg.weights.delta = 1.0;
      break;
    case DatasetKind::News:
      cfg.hidden_dim = 100;
      cfg.epochs = 80;
      cfg.batch_size = 256;
      cfg.weights.delta = 1.0;
      break;
  }
  return cfg;
}

Dataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case DatasetKind::Simu:
      return gen_simu(SimuSpec{spec.k, 500, 200, seed});
    case DatasetKind::Ihdp:
      return gen_ihdp(spec.covariates, seed, spec.train_fraction);
    case DatasetKind::News:
      return gen_news(spec.covariates, seed, spec.train_fraction);
  }
  throw ContractError("unknown dataset kind");
}

SeedMetrics evaluate_model(const DrvaeModel& model, const Dataset& ds, int l,
                           Rng& rng,
                           const std::optional<std::filesystem::path>& out_dir,
                           bool oracle_predictor) {
  const auto test_rows = ds.rows_of(Split::Test);
  if (test_rows.empty()) throw ContractError("evaluate: dataset has no test rows");
  if (!ds.has_oracle()) throw ContractError("evaluate: dataset has no oracle");
  const ad::Matrix x_test = ds.x_rows(test_rows);

  const DoseGrid grid = DoseGrid::romberg();
  const ad::Matrix truth_grid = oracle_curves(ds, test_rows, grid);
  ad::Matrix pred_grid = oracle_predictor
                             ? truth_grid
                             : predict_curves(model, x_test, grid, l, rng);

  std::vector<double> test_doses(test_rows.size());
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    test_doses[i] = ds.t(test_rows[i]);
  }
  const DoseGrid obs = DoseGrid::observed(test_doses);
  const ad::Matrix truth_obs = oracle_curves(ds, test_rows, obs);
  ad::Matrix pred_obs = oracle_predictor
                            ? truth_obs
                            : predict_curves(model, x_test, obs, l, rng);

  SeedMetrics m;
  m.amse = amse(pred_obs, truth_obs);
  m.sqrt_mise = std::sqrt(mise(pred_grid, truth_grid, grid));
  m.sqrt_dpe = std::sqrt(dpe(pred_grid, truth_grid));
  m.i_mse = i_mse(pred_grid, truth_grid);

  if (out_dir) {
    std::string curve = "t\tpsi_hat\tpsi_true\n";
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      curve += format_double(grid.points[static_cast<std::size_t>(j)]);
      curve.push_back('\t');
      curve += format_double(pred_grid.col(j).mean());
      curve.push_back('\t');
      curve += format_double(truth_grid.col(j).mean());
      curve.push_back('\n');
    }
    write_file_atomic(*out_dir / "adrf.tsv", curve);

    std::string metrics = "metric\tvalue\n";
    metrics += "amse\t" + format_double(m.amse) + "\n";
    metrics += "sqrt_mise\t" + format_double(m.sqrt_mise) + "\n";
    metrics += "sqrt_dpe\t" + format_double(m.sqrt_dpe) + "\n";
    metrics += "i_mse\t" + format_double(m.i_mse) + "\n";
    write_file_atomic(*out_dir / "metrics.tsv", metrics);
  }
  return m;
}

SeedMetrics run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                     const std::optional<std::filesystem::path>& seed_dir) {
  Dataset ds = generate_dataset(cfg.data, seed);
  LatentConfig latent = cfg.latent;
  latent.hidden_dim = cfg.train.hidden_dim;
  latent.num_layers = cfg.train.num_layers;
  Rng init_rng = make_rng(seed, "init");
  DrvaeModel model(ds.column_kind, latent, init_rng);
  Rng train_rng = make_rng(seed, "train");
  TrainResult trained = train_model(model, ds, cfg.train, train_rng);
  if (seed_dir) {
    write_train_log(trained.log, *seed_dir / "train_log.tsv");
    model.save(*seed_dir / "model.ckpt");
  }
  Rng eval_rng = make_rng(seed, "eval");
  SeedMetrics m = evaluate_model(model, ds, cfg.l, eval_rng, seed_dir);
  m.seed = seed;
  return m;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.n_seeds < 1) throw ConfigError("experiment: n_seeds must be >= 1");
  cfg.latent.validate();
  cfg.train.validate();

  ExperimentResult result;
  result.seeds.resize(static_cast<std::size_t>(cfg.n_seeds));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= cfg.n_seeds) return;
      SeedRunResult& slot = result.seeds[static_cast<std::size_t>(i)];
      slot.seed = cfg.base_seed + static_cast<std::uint64_t>(i);
      try {
        std::optional<std::filesystem::path> seed_dir;
        if (cfg.save_artifacts) {
          seed_dir = cfg.out_dir / ("seed_" + std::to_string(slot.seed));
          std::filesystem::create_directories(*seed_dir);
        }
        slot.metrics = run_seed(cfg, slot.seed, seed_dir);
      } catch (const std::exception& e) {
        slot.failed = true;
        slot.error = e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min(cfg.jobs, cfg.n_seeds));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  std::vector<SeedMetrics> ok;
  for (const SeedRunResult& s : result.seeds) {
    if (!s.failed) ok.push_back(s.metrics);
  }
  result.all_ok = ok.size() == result.seeds.size();
  if (!ok.empty()) result.report = aggregate(ok);

  std::filesystem::create_directories(cfg.out_dir);
  write_seed_details(result.seeds, cfg.out_dir / "seeds.tsv");
  if (!ok.empty()) {
    write_report(result.report, "drvae", dataset_kind_name(cfg.data.kind),
                 cfg.out_dir / "report.tsv");
  }
  return result;
}

void apply_sweep_parameter(ExperimentConfig& cfg, const std::string& parameter,
                           double value) {
  auto as_dim = [&](const char* name) {
    if (value < 0 || value != std::floor(value)) {
      throw ConfigError(std::string("sweep: ") + name +
                        " requires a nonnegative integer, got " +
                        format_double(value));
    }
    return static_cast<int>(value);
  };
  if (parameter == "alpha") {
    cfg.train.weights.alpha = value;
  } else if (parameter == "beta") {
    cfg.train.weights.beta = value;
  } else if (parameter == "gamma") {
    cfg.train.weights.gamma = value;
  } else if (parameter == "delta") {
    cfg.train.weights.delta = value;
  } else if (parameter == "lambda") {
    cfg.train.weights.lambda = value;
  } else if (parameter == "d_gamma") {
    cfg.latent.d_gamma = as_dim("d_gamma");
  } else if (parameter == "d_delta") {
    cfg.latent.d_delta = as_dim("d_delta");
  } else if (parameter == "d_upsilon") {
    cfg.latent.d_upsilon = as_dim("d_upsilon");
  } else if (parameter == "d_e") {
    cfg.latent.d_e = as_dim("d_e");
  } else {
    throw ConfigError("sweep: unknown parameter '" + parameter + "'");
  }
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& base,
                                  const std::string& parameter,
                                  const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep: values list is empty");
  std::vector<SweepPoint> points;
  for (double v : values) {
    ExperimentConfig cfg = base;
    apply_sweep_parameter(cfg, parameter, v);
    cfg.out_dir = base.out_dir / (parameter + "_" + format_double(v));
    SweepPoint point;
    point.value = v;
    point.result = run_experiment(cfg);
    points.push_back(std::move(point));
  }
  std::string table =
      "value\tamse_mean\tamse_std\tsqrt_mise_mean\tsqrt_mise_std\t"
      "sqrt_dpe_mean\tsqrt_dpe_std\ti_mse_mean\ti_mse_std\n";
  for (const SweepPoint& p : points) {
    const MetricsReport& r = p.result.report;
    table += format_double(p.value);
    for (const MetricStats& s : {r.amse, r.sqrt_mise, r.sqrt_dpe, r.i_mse}) {
      table.push_back('\t');
      table += format_double(s.mean);
      table.push_back('\t');
      table += r.has_std ? format_double(s.std) : "n/a";
    }
    table.push_back('\n');
  }
  std::filesystem::create_directories(base.out_dir);
  write_file_atomic(base.out_dir / "sweep.tsv", table);
  return points;
}

void write_seed_details(const std::vector<SeedRunResult>& seeds,
                        const std::filesystem::path& path) {
  std::string out = "seed\tstatus\tamse\tsqrt_mise\tsqrt_dpe\ti_mse\n";
  for (const SeedRunResult& s : seeds) {
    out += std::to_string(s.seed);
    if (s.failed) {
      out += "\tfailed(" + s.error + ")\tn/a\tn/a\tn/a\tn/a\n";
      continue;
    }
    out += "\tok";
    for (double v : {s.metrics.amse, s.metrics.sqrt_mise, s.metrics.sqrt_dpe,
                     s.metrics.i_mse}) {
      out.push_back('\t');
      out += format_double(v);
    }
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

void write_report(const MetricsReport& report, const std::string& method,
                  const std::string& dataset, const std::filesystem::path& path) {
  std::string out = "method\tdataset\tmetric\tmean\tstd\tn_seeds\n";
  auto row = [&](const char* metric, const MetricStats& s) {
    out += method + "\t" + dataset + "\t" + metric + "\t" + format_double(s.mean) +
           "\t" + (report.has_std ? format_double(s.std) : "n/a") + "\t" +
           std::to_string(report.n_seeds) + "\n";
  };
  row("amse", report.amse);
  row("sqrt_mise", report.sqrt_mise);
  row("sqrt_dpe", report.sqrt_dpe);
  row("i_mse", report.i_mse);
  write_file_atomic(path, out);
}

}  // namespace drvae
