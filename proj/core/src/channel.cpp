#include "spii/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace spii {

namespace {

void validate_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0)
    throw std::invalid_argument("channel matrix must be non-empty");
  for (int x = 0; x < m.rows(); ++x) {
    double sum = 0.0;
    for (int y = 0; y < m.cols(); ++y) {
      double v = m(x, y);
      if (v < 0.0 || v > 1.0 + kRowSumTol)
        throw std::invalid_argument("channel entry outside [0,1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw std::invalid_argument(
          "channel row " + std::to_string(x) +
          " does not sum to 1 (renormalization refused)");
  }
}

Eigen::MatrixXd to_double(const RatMatrix& r) {
  Eigen::MatrixXd m(r.size(), r.front().size());
  for (std::size_t x = 0; x < r.size(); ++x) {
    if (r[x].size() != r.front().size())
      throw std::invalid_argument("ragged rational matrix");
    for (std::size_t y = 0; y < r[x].size(); ++y)
      m(x, y) = boost::rational_cast<double>(r[x][y]);
  }
  return m;
}

}  // namespace

Channel make_channel(Eigen::MatrixXd matrix, std::optional<RatMatrix> exact) {
  validate_matrix(matrix);
  if (exact) {
    for (const auto& row : *exact) {
      Rat sum(0);
      for (const auto& v : row) sum += v;
      if (sum != Rat(1))
        throw std::invalid_argument("exact channel row does not sum to 1");
    }
  }
  return Channel{std::move(matrix), std::move(exact)};
}

Channel make_channel_exact(RatMatrix exact) {
  Eigen::MatrixXd m = to_double(exact);
  return make_channel(std::move(m), std::move(exact));
}

Channel symmetric_channel(int n, double eps) {
  if (n < 2) throw std::invalid_argument("symmetric_channel: need n >= 2");
  if (eps <= 0.0 || eps >= 1.0)
    throw std::invalid_argument("symmetric_channel: eps must be in (0,1)");
  Eigen::MatrixXd m(n, n);
  double off = eps / n;
  double diag = 1.0 - eps * (1.0 - 1.0 / n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) m(x, y) = x == y ? diag : off;
  return make_channel(std::move(m));
}

Channel symmetric_channel_exact(int n, const Rat& eps) {
  if (n < 2) throw std::invalid_argument("symmetric_channel: need n >= 2");
  if (eps <= Rat(0) || eps >= Rat(1))
    throw std::invalid_argument("symmetric_channel: eps must be in (0,1)");
  Rat off = eps / n;
  Rat diag = Rat(1) - eps * (Rat(1) - Rat(1, n));
  RatMatrix r(n, std::vector<Rat>(n));
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) r[x][y] = x == y ? diag : off;
  return make_channel_exact(std::move(r));
}

Channel identity_channel(int n) {
  if (n < 1) throw std::invalid_argument("identity_channel: need n >= 1");
  RatMatrix r(n, std::vector<Rat>(n, Rat(0)));
  for (int x = 0; x < n; ++x) r[x][x] = Rat(1);
  return make_channel_exact(std::move(r));
}

Channel uniform_row_channel(int in_size, const Eigen::VectorXd& row) {
  Eigen::MatrixXd m(in_size, row.size());
  for (int x = 0; x < in_size; ++x) m.row(x) = row.transpose();
  return make_channel(std::move(m));
}

bool is_informative(const Channel& c) {
  for (int a = 0; a < c.input_size(); ++a)
    for (int b = a + 1; b < c.input_size(); ++b)
      for (int y = 0; y < c.output_size(); ++y)
        if (std::abs(c.matrix(a, y) - c.matrix(b, y)) > kRowSumTol) return true;
  return false;
}

EpsDecomposeOutcome max_eps_decompose(const Channel& c) {
  const int nx = c.input_size();
  const int ny = c.output_size();
  EpsDecomposeOutcome out;

  Eigen::VectorXd colmin(ny);
  for (int y = 0; y < ny; ++y) {
    double m = c.matrix(0, y);
    for (int x = 1; x < nx; ++x) m = std::min(m, c.matrix(x, y));
    colmin(y) = m;
  }
  double eps = colmin.sum();
  out.eps_star = eps;

  if (colmin.minCoeff() <= 0.0) {
    out.status = EpsDecomposeOutcome::Status::kZeroColumnMinimum;
    return out;
  }
  if (eps >= 1.0 - kRowSumTol) {
    out.status = EpsDecomposeOutcome::Status::kUninformative;
    out.eps_star = 1.0;
    return out;
  }

  EpsMajorDecomposition dec;
  dec.epsilon = eps;
  dec.c0_row = colmin / eps;
  dec.c1 = (c.matrix - Eigen::VectorXd::Ones(nx) * colmin.transpose()) / (1.0 - eps);

  if (c.exact) {
    const RatMatrix& e = *c.exact;
    std::vector<Rat> cm(ny);
    for (int y = 0; y < ny; ++y) {
      Rat m = e[0][y];
      for (int x = 1; x < nx; ++x) m = std::min(m, e[x][y]);
      cm[y] = m;
    }
    Rat eps_r(0);
    for (const auto& v : cm) eps_r += v;
    dec.epsilon_exact = eps_r;
    std::vector<Rat> c0(ny);
    for (int y = 0; y < ny; ++y) c0[y] = cm[y] / eps_r;
    dec.c0_row_exact = c0;
    RatMatrix c1(nx, std::vector<Rat>(ny));
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < ny; ++y)
        c1[x][y] = (e[x][y] - cm[y]) / (Rat(1) - eps_r);
    dec.c1_exact = std::move(c1);
  }

  out.status = EpsDecomposeOutcome::Status::kOk;
  out.decomposition = std::move(dec);
  return out;
}

Channel augment_channel(const Channel& c, const EpsMajorDecomposition& dec) {
  const int nx = c.input_size();
  const int ny = c.output_size();
  if (dec.c1.rows() != nx || dec.c1.cols() != ny || dec.c0_row.size() != ny)
    throw std::invalid_argument("augment_channel: decomposition shape mismatch");
  Eigen::MatrixXd recon =
      dec.epsilon * Eigen::VectorXd::Ones(nx) * dec.c0_row.transpose() +
      (1.0 - dec.epsilon) * dec.c1;
  if ((recon - c.matrix).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument(
        "augment_channel: decomposition does not reconstruct the channel");

  Eigen::MatrixXd m(nx, 2 * ny);
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) {
      m(x, 2 * y) = dec.epsilon * dec.c0_row(y);
      m(x, 2 * y + 1) = (1.0 - dec.epsilon) * dec.c1(x, y);
    }

  std::optional<RatMatrix> exact;
  if (c.exact && dec.epsilon_exact && dec.c0_row_exact && dec.c1_exact) {
    RatMatrix r(nx, std::vector<Rat>(2 * ny));
    const Rat& e = *dec.epsilon_exact;
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < ny; ++y) {
        r[x][2 * y] = e * (*dec.c0_row_exact)[y];
        r[x][2 * y + 1] = (Rat(1) - e) * (*dec.c1_exact)[x][y];
      }
    exact = std::move(r);
  }
  return make_channel(std::move(m), std::move(exact));
}

int sample_output(const Channel& c, int x, double u) {
  if (x < 0 || x >= c.input_size())
    throw std::invalid_argument("sample_output: symbol out of range");
  double acc = 0.0;
  for (int y = 0; y < c.output_size(); ++y) {
    acc += c.matrix(x, y);
    if (u < acc) return y;
  }
  return c.output_size() - 1;
}

Rat parse_rational(const std::string& text) {
  auto slash = text.find('/');
  if (slash != std::string::npos) {
    long long num = std::stoll(text.substr(0, slash));
    long long den = std::stoll(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    return Rat(num, den);
  }
  auto dot = text.find('.');
  if (dot == std::string::npos) return Rat(std::stoll(text));
  std::string digits = text.substr(0, dot) + text.substr(dot + 1);
  long long den = 1;
  for (std::size_t i = 0; i < text.size() - dot - 1; ++i) den *= 10;
  return Rat(std::stoll(digits), den);
}

}  // namespace spii
