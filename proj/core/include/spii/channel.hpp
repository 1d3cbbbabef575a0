#pragma once

#include <Eigen/Dense>
#include <boost/rational.hpp>
#include <optional>
#include <string>
#include <vector>

namespace spii {

using Rat = boost::rational<long long>;
using RatMatrix = std::vector<std::vector<Rat>>;

// Finite-alphabet memoryless channel: row x of `matrix` is the output
// distribution given input symbol x. Alphabets are integer-indexed
// [0, size); symbolic names live only in config files. When the matrix was
// given as rationals, `exact` carries them so decomposition identities can be
// checked without rounding.
struct Channel {
  Eigen::MatrixXd matrix;
  std::optional<RatMatrix> exact;

  int input_size() const { return static_cast<int>(matrix.rows()); }
  int output_size() const { return static_cast<int>(matrix.cols()); }
};

inline constexpr double kRowSumTol = 1e-12;

// Validates row-stochasticity within kRowSumTol and entries in [0,1].
// Renormalization is refused: off rows are an error, not a repair.
Channel make_channel(Eigen::MatrixXd matrix,
                     std::optional<RatMatrix> exact = std::nullopt);
Channel make_channel_exact(RatMatrix exact);

// Symmetric N-ary channel: diagonal 1 - eps(1 - 1/N), off-diagonal eps/N.
// Carries an exact rational matrix when eps is given as a rational.
Channel symmetric_channel(int n, double eps);
Channel symmetric_channel_exact(int n, const Rat& eps);
Channel identity_channel(int n);
// All rows equal to `row` (an uninformative channel).
Channel uniform_row_channel(int in_size, const Eigen::VectorXd& row);

// True iff some pair of rows differs in some entry by more than kRowSumTol.
bool is_informative(const Channel& c);

struct EpsMajorDecomposition {
  double epsilon = 0.0;          // in (0,1)
  Eigen::VectorXd c0_row;        // the identical (everywhere positive) row of C0
  Eigen::MatrixXd c1;            // row-stochastic, every column has a zero
  // Exact counterparts when the channel carried rationals.
  std::optional<Rat> epsilon_exact;
  std::optional<std::vector<Rat>> c0_row_exact;
  std::optional<RatMatrix> c1_exact;
};

struct EpsDecomposeOutcome {
  enum class Status {
    kOk,
    kZeroColumnMinimum,  // eps* = 0: some column minimum is zero
    kUninformative,      // eps* = 1: identical rows, C1 undefined
  };
  Status status = Status::kZeroColumnMinimum;
  double eps_star = 0.0;  // sum over columns of the column minima
  std::optional<EpsMajorDecomposition> decomposition;

  bool ok() const { return status == Status::kOk; }
};

// Canonical maximal decomposition C = eps C0 + (1-eps) C1 with
// eps* = sum_y min_x C_{x,y}, c0_row[y] = min_x C_{x,y} / eps*. Maximality
// makes eps a channel property usable in the capacity bounds.
EpsDecomposeOutcome max_eps_decompose(const Channel& c);

// Lifted channel over Y x {0,1} exposing the switching variable: output
// (y, xi) is indexed 2y + xi, with P((y,0)|x) = eps c0[y] and
// P((y,1)|x) = (1-eps) C1_{x,y}. Marginalizing xi recovers C.
Channel augment_channel(const Channel& c, const EpsMajorDecomposition& dec);

// Inverse-CDF sample of row x at the uniform variate u.
int sample_output(const Channel& c, int x, double u);

// Parses "p/q" or a decimal literal into a rational; used by config loading.
Rat parse_rational(const std::string& text);

}  // namespace spii
