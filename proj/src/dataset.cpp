#include "drvae/dataset.hpp"

#include <cmath>
#include <sstream>

#include "drvae/errors.hpp"
#include "drvae/textio.hpp"

namespace drvae {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr char kMagic[] = "drvae-dataset";
constexpr int kFormatVersion = 1;

// 0-based IHDP feature groups (the generator equations index from 1).
const std::vector<int> kIhdpAdjustment = {3, 6, 7, 8, 9, 10, 11, 12, 13, 14};
}  // namespace

std::vector<Eigen::Index> Dataset::rows_of(Split s) const {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < n(); ++i) {
    if (split[static_cast<std::size_t>(i)] == s) rows.push_back(i);
  }
  return rows;
}

Eigen::MatrixXd Dataset::x_rows(const std::vector<Eigen::Index>& rows) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), p());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out.row(i) = x.row(rows[static_cast<std::size_t>(i)]);
  }
  return out;
}

bool Dataset::has_oracle() const {
  return generator.name == "simu" || generator.name == "ihdp" ||
         generator.name == "news";
}

double Dataset::oracle(Eigen::Index row, double dose) const {
  const Eigen::RowVectorXd xr = x.row(row);
  if (generator.name == "simu") return simu_outcome_noiseless(xr, dose);
  if (generator.name == "ihdp") return ihdp_outcome_noiseless(xr, dose, generator.c1);
  if (generator.name == "news") return news_outcome_noiseless(xr, dose, generator.news_v);
  throw ContractError("oracle: dataset has no generator '" + generator.name + "'");
}

void Dataset::validate() const {
  const auto nn = n();
  if (static_cast<Eigen::Index>(column_kind.size()) != p()) {
    throw IngestionError("dataset: column_kind length " +
                         std::to_string(column_kind.size()) +
                         " does not match p=" + std::to_string(p()));
  }
  if (t.size() != nn || y.size() != nn ||
      static_cast<Eigen::Index>(split.size()) != nn) {
    throw IngestionError("dataset: t/y/split lengths do not match n=" +
                         std::to_string(nn));
  }
  for (Eigen::Index j = 0; j < p(); ++j) {
    if (column_kind[static_cast<std::size_t>(j)] != ColumnKind::Binary) continue;
    for (Eigen::Index i = 0; i < nn; ++i) {
      const double v = x(i, j);
      if (v != 0.0 && v != 1.0) {
        throw IngestionError("dataset: binary column " + std::to_string(j) +
                             " holds non-binary value at row " + std::to_string(i));
      }
    }
  }
  for (Eigen::Index i = 0; i < nn; ++i) {
    if (!(t(i) >= 0.0 && t(i) <= 1.0)) {
      throw IngestionError("dataset: treatment outside [0,1] at row " +
                           std::to_string(i));
    }
  }
}

std::string column_kind_string(const std::vector<ColumnKind>& kinds) {
  std::string s;
  s.reserve(kinds.size());
  for (ColumnKind k : kinds) s.push_back(k == ColumnKind::Binary ? 'b' : 'c');
  return s;
}

std::vector<ColumnKind> parse_column_kind_string(const std::string& s) {
  std::vector<ColumnKind> kinds;
  kinds.reserve(s.size());
  for (char c : s) {
    if (c == 'b') {
      kinds.push_back(ColumnKind::Binary);
    } else if (c == 'c') {
      kinds.push_back(ColumnKind::Continuous);
    } else {
      throw IngestionError(std::string("dataset: invalid column tag '") + c + "'");
    }
  }
  return kinds;
}

double simu_outcome_noiseless(const Eigen::RowVectorXd& x, double dose) {
  const double amp = 4.0 * std::pow(std::max(x(0), x(5)), 3) /
                     (1.0 + 2.0 * x(2) * x(2)) * std::sin(x(3));
  return std::cos(2.0 * kPi * (dose - 0.5)) * (dose * dose + amp);
}

double ihdp_outcome_noiseless(const Eigen::RowVectorXd& x, double dose, double c1) {
  double adj = 0.0;
  for (int j : kIhdpAdjustment) adj += x(j) - c1;
  adj /= static_cast<double>(kIhdpAdjustment.size());
  const double inner = std::tanh(5.0 * adj) +
                       std::exp(0.2 * (x(0) - x(5))) /
                           (0.5 + 5.0 * std::min({x(1), x(2), x(4)}));
  return std::sin(3.0 * kPi * dose) / (1.2 - dose) * inner;
}

double news_outcome_noiseless(const Eigen::RowVectorXd& x, double dose,
                              const Eigen::MatrixXd& v) {
  if (v.rows() != 3 || v.cols() != x.size()) {
    throw ContractError("news oracle: projection matrix must be 3 x p");
  }
  const double v1x = v.row(0).dot(x);
  const double v2x = v.row(1).dot(x);
  const double v3x = v.row(2).dot(x);
  const double yp = std::exp(v2x / v3x - 0.3);
  const double level = std::max(-2.0, std::min(2.0, yp)) + 20.0 * v1x;
  const double dose_factor =
      4.0 * (dose - 0.5) * (dose - 0.5) * std::sin(kPi * 0.5 * dose);
  return 2.0 * level * dose_factor;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::string out;
  out.reserve(static_cast<std::size_t>(ds.n() * (ds.p() + 2) * 20));
  auto line = [&out](std::initializer_list<std::string> toks) {
    bool first = true;
    for (const auto& t : toks) {
      if (!first) out.push_back(' ');
      out += t;
      first = false;
    }
    out.push_back('\n');
  };
  line({kMagic, std::to_string(kFormatVersion)});
  line({"n", std::to_string(ds.n())});
  line({"p", std::to_string(ds.p())});
  line({"columns", column_kind_string(ds.column_kind)});
  line({"generator", ds.generator.name});
  line({"k", std::to_string(ds.generator.k)});
  line({"seed", std::to_string(ds.generator.seed)});
  line({"train_fraction", format_double(ds.generator.train_fraction)});
  line({"synthetic_covariates", ds.generator.synthetic_covariates ? "1" : "0"});
  line({"c1", format_double(ds.generator.c1)});
  line({"c2", format_double(ds.generator.c2)});
  line({"news_v", std::to_string(ds.generator.news_v.rows()),
        std::to_string(ds.generator.news_v.cols())});
  for (Eigen::Index i = 0; i < ds.generator.news_v.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.generator.news_v.cols(); ++j) {
      if (j) out.push_back(' ');
      out += format_double(ds.generator.news_v(i, j));
    }
    out.push_back('\n');
  }
  out += "data\n";
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out += ds.split[static_cast<std::size_t>(i)] == Split::Train ? "train" : "test";
    out.push_back(' ');
    out += format_double(ds.t(i));
    out.push_back(' ');
    out += format_double(ds.y(i));
    for (Eigen::Index j = 0; j < ds.p(); ++j) {
      out.push_back(' ');
      out += format_double(ds.x(i, j));
    }
    out.push_back('\n');
  }
  out += "end\n";
  write_file_atomic(path, out);
}

namespace {

class LineReader {
 public:
  LineReader(std::string text, std::string where)
      : text_(std::move(text)), where_(std::move(where)) {}

  // Next line split into whitespace tokens; skips blank lines.
  std::vector<std::string> next() {
    while (pos_ < text_.size()) {
      ++lineno_;
      std::size_t end = text_.find('\n', pos_);
      if (end == std::string::npos) end = text_.size();
      std::string_view line(text_.data() + pos_, end - pos_);
      pos_ = end + 1;
      std::vector<std::string> toks;
      std::size_t i = 0;
      while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) toks.emplace_back(line.substr(start, i - start));
      }
      if (!toks.empty()) return toks;
    }
    throw IngestionError(where_ + ": unexpected end of file");
  }

  std::string context() const { return where_ + ":" + std::to_string(lineno_); }

 private:
  std::string text_;
  std::string where_;
  std::size_t pos_ = 0;
  int lineno_ = 0;
};

std::vector<std::string> expect_key(LineReader& r, const std::string& key,
                                    std::size_t min_tokens) {
  auto toks = r.next();
  if (toks[0] != key || toks.size() < min_tokens) {
    throw IngestionError(r.context() + ": expected '" + key + "' entry, found '" +
                         toks[0] + "'");
  }
  return toks;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
  LineReader r(read_file(path), path.string());
  auto magic = r.next();
  if (magic.size() != 2 || magic[0] != kMagic) {
    throw IngestionError(path.string() + ": not a dataset file");
  }
  if (parse_long(magic[1], r.context()) != kFormatVersion) {
    throw IngestionError(path.string() + ": unsupported format version " + magic[1]);
  }
  Dataset ds;
  const long n = parse_long(expect_key(r, "n", 2)[1], r.context());
  const long p = parse_long(expect_key(r, "p", 2)[1], r.context());
  ds.column_kind = parse_column_kind_string(expect_key(r, "columns", 2)[1]);
  if (static_cast<long>(ds.column_kind.size()) != p) {
    throw IngestionError(r.context() + ": columns entry length " +
                         std::to_string(ds.column_kind.size()) +
                         " does not match p=" + std::to_string(p));
  }
  ds.generator.name = expect_key(r, "generator", 2)[1];
  ds.generator.k = static_cast<int>(parse_long(expect_key(r, "k", 2)[1], r.context()));
  ds.generator.seed = static_cast<std::uint64_t>(
      parse_long(expect_key(r, "seed", 2)[1], r.context()));
  ds.generator.train_fraction =
      parse_double(expect_key(r, "train_fraction", 2)[1], r.context());
  ds.generator.synthetic_covariates =
      parse_long(expect_key(r, "synthetic_covariates", 2)[1], r.context()) != 0;
  ds.generator.c1 = parse_double(expect_key(r, "c1", 2)[1], r.context());
  ds.generator.c2 = parse_double(expect_key(r, "c2", 2)[1], r.context());
  auto vdims = expect_key(r, "news_v", 3);
  const long vr = parse_long(vdims[1], r.context());
  const long vc = parse_long(vdims[2], r.context());
  ds.generator.news_v.resize(vr, vc);
  for (long i = 0; i < vr; ++i) {
    auto toks = r.next();
    if (static_cast<long>(toks.size()) != vc) {
      throw IngestionError(r.context() + ": news_v row has " +
                           std::to_string(toks.size()) + " entries, expected " +
                           std::to_string(vc));
    }
    for (long j = 0; j < vc; ++j) {
      ds.generator.news_v(i, j) = parse_double(toks[static_cast<std::size_t>(j)],
                                               r.context());
    }
  }
  auto data_tag = r.next();
  if (data_tag[0] != "data") {
    throw IngestionError(r.context() + ": expected 'data' section");
  }
  ds.x.resize(n, p);
  ds.t.resize(n);
  ds.y.resize(n);
  ds.split.resize(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    auto toks = r.next();
    if (static_cast<long>(toks.size()) != p + 3) {
      throw IngestionError(r.context() + ": row has " + std::to_string(toks.size()) +
                           " fields, expected " + std::to_string(p + 3));
    }
    if (toks[0] == "train") {
      ds.split[static_cast<std::size_t>(i)] = Split::Train;
    } else if (toks[0] == "test") {
      ds.split[static_cast<std::size_t>(i)] = Split::Test;
    } else {
      throw IngestionError(r.context() + ": unknown split tag '" + toks[0] + "'");
    }
    ds.t(i) = parse_double(toks[1], r.context());
    ds.y(i) = parse_double(toks[2], r.context());
    for (long j = 0; j < p; ++j) {
      ds.x(i, j) = parse_double(toks[static_cast<std::size_t>(j + 3)], r.context());
    }
  }
  auto end_tag = r.next();
  if (end_tag[0] != "end") {
    throw IngestionError(r.context() + ": expected 'end' marker");
  }
  ds.validate();
  return ds;
}

}  // namespace drvae
