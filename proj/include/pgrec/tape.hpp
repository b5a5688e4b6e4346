#pragma once

#include <string>
#include <vector>

#include "pgrec/matrix.hpp"
#include "pgrec/rng.hpp"

namespace pgrec {

// A trainable tensor. Gradients accumulate into `grad`; the owner zeroes
// them between steps.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}

  void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

// Running statistics for a batch-normalized layer. Updated as a side effect
// of train-mode forward passes; read-only in eval mode.
struct BatchNormState {
  Matrix running_mean;  // 1 x c
  Matrix running_var;   // 1 x c
  double momentum = 0.9;
  double eps = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(int c)
      : running_mean(1, c), running_var(Matrix::full(1, c, 1.0)) {}
};

// Reverse-mode differentiation over matrix expressions. Records one forward
// pass; backward() accumulates exact gradients of a scalar node into every
// registered Parameter. Replaying the same graph gives identical gradients.
class GradientTape {
 public:
  using ValueId = int;

  ValueId constant(Matrix m);
  ValueId param(Parameter& p);

  ValueId matmul(ValueId a, ValueId b);
  // y += csr * x. `transposed` must be the transpose of `fwd` (same object
  // allowed when symmetric); both must outlive the tape.
  ValueId sparse_matmul(const SparseCsr* fwd, const SparseCsr* transposed, ValueId x);
  ValueId add(ValueId a, ValueId b);
  ValueId sub(ValueId a, ValueId b);
  ValueId mul(ValueId a, ValueId b);
  // x (r x c) plus a 1 x c row vector broadcast over rows.
  ValueId add_row(ValueId x, ValueId row);
  ValueId relu(ValueId x);
  ValueId concat_cols(ValueId a, ValueId b);
  ValueId gather_rows(ValueId x, std::vector<int> idx);
  ValueId scale(ValueId x, double s);
  ValueId mean_all(ValueId x);   // 1x1
  ValueId sum_squares(ValueId x);  // 1x1
  ValueId sqrt_elem(ValueId x);
  // Inverted dropout; keeps/scales with a mask drawn from rng. rate in [0,1).
  ValueId dropout(ValueId x, double rate, Rng& rng);
  // Batch normalization over rows (each column standardized). Train mode
  // uses batch statistics and updates `state`; eval mode reads `state`.
  ValueId batch_norm(ValueId x, ValueId gamma, ValueId beta, BatchNormState& state, bool train);

  const Matrix& value(ValueId id) const { return nodes_[id].val; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Parameter*>& params() const { return params_; }

  // Reverse pass from a scalar (1x1) node; throws on non-scalar loss.
  void backward(ValueId loss);

 private:
  enum class Op {
    kConst, kParam, kMatmul, kSparseMatmul, kAdd, kSub, kMul, kAddRow, kRelu,
    kConcatCols, kGatherRows, kScale, kMeanAll, kSumSquares, kSqrt, kDropout,
    kBatchNorm,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int c = -1;
    Matrix val;
    Parameter* parameter = nullptr;
    const SparseCsr* sp_fwd = nullptr;
    const SparseCsr* sp_bwd = nullptr;
    double scalar = 0.0;
    std::vector<int> idx;
    Matrix aux;   // dropout mask / batch-norm normalized input
    Matrix aux2;  // batch-norm inverse stddev (1 x c)
  };

  ValueId push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<ValueId>(nodes_.size()) - 1;
  }
  const Matrix& val(ValueId id) const { return nodes_[id].val; }

  std::vector<Node> nodes_;
  std::vector<Parameter*> params_;
};

}  // namespace pgrec
