#include "pgrec/tape.hpp"

#include <algorithm>
#include <cmath>

#include "pgrec/kernels.hpp"

namespace pgrec {

GradientTape::ValueId GradientTape::constant(Matrix m) {
  Node n;
  n.op = Op::kConst;
  n.val = std::move(m);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::param(Parameter& p) {
  Node n;
  n.op = Op::kParam;
  n.val = p.value;
  n.parameter = &p;
  if (std::find(params_.begin(), params_.end(), &p) == params_.end()) params_.push_back(&p);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::matmul(ValueId a, ValueId b) {
  require(val(a).cols == val(b).rows, "tape matmul: inner dimensions differ");
  Node n;
  n.op = Op::kMatmul;
  n.a = a;
  n.b = b;
  n.val = Matrix(val(a).rows, val(b).cols);
  kernels::gemm_nn(val(a).data(), val(b).data(), n.val.data(), val(a).rows, val(a).cols,
                   val(b).cols);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::sparse_matmul(const SparseCsr* fwd, const SparseCsr* transposed,
                                                  ValueId x) {
  require(fwd && transposed, "tape sparse_matmul: null operator");
  require(fwd->cols == val(x).rows, "tape sparse_matmul: inner dimensions differ");
  Node n;
  n.op = Op::kSparseMatmul;
  n.a = x;
  n.sp_fwd = fwd;
  n.sp_bwd = transposed;
  n.val = Matrix(fwd->rows, val(x).cols);
  kernels::csr_matmul(fwd->row_ptr.data(), fwd->col.data(), fwd->val.data(), fwd->rows,
                      val(x).data(), val(x).cols, n.val.data());
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::add(ValueId a, ValueId b) {
  require(val(a).same_shape(val(b)), "tape add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.val = Matrix(val(a).rows, val(a).cols);
  kernels::add(val(a).data(), val(b).data(), n.val.data(), n.val.size());
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::sub(ValueId a, ValueId b) {
  require(val(a).same_shape(val(b)), "tape sub: shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.val = Matrix(val(a).rows, val(a).cols);
  kernels::sub(val(a).data(), val(b).data(), n.val.data(), n.val.size());
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::mul(ValueId a, ValueId b) {
  require(val(a).same_shape(val(b)), "tape mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.val = Matrix(val(a).rows, val(a).cols);
  kernels::mul(val(a).data(), val(b).data(), n.val.data(), n.val.size());
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::add_row(ValueId x, ValueId row) {
  require(val(row).rows == 1 && val(row).cols == val(x).cols, "tape add_row: bad row vector");
  Node n;
  n.op = Op::kAddRow;
  n.a = x;
  n.b = row;
  n.val = val(x);
  for (int r = 0; r < n.val.rows; ++r)
    kernels::axpy(1.0, val(row).data(), n.val.row(r), n.val.cols);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::relu(ValueId x) {
  Node n;
  n.op = Op::kRelu;
  n.a = x;
  n.val = Matrix(val(x).rows, val(x).cols);
  kernels::relu(val(x).data(), n.val.data(), n.val.size());
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::concat_cols(ValueId a, ValueId b) {
  require(val(a).rows == val(b).rows, "tape concat_cols: row mismatch");
  Node n;
  n.op = Op::kConcatCols;
  n.a = a;
  n.b = b;
  n.val = Matrix(val(a).rows, val(a).cols + val(b).cols);
  for (int r = 0; r < n.val.rows; ++r) {
    std::copy(val(a).row(r), val(a).row(r) + val(a).cols, n.val.row(r));
    std::copy(val(b).row(r), val(b).row(r) + val(b).cols, n.val.row(r) + val(a).cols);
  }
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::gather_rows(ValueId x, std::vector<int> idx) {
  Node n;
  n.op = Op::kGatherRows;
  n.a = x;
  n.val = Matrix(static_cast<int>(idx.size()), val(x).cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < val(x).rows, "tape gather_rows: index out of range");
    std::copy(val(x).row(idx[i]), val(x).row(idx[i]) + val(x).cols, n.val.row(static_cast<int>(i)));
  }
  n.idx = std::move(idx);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::scale(ValueId x, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = x;
  n.scalar = s;
  n.val = val(x);
  kernels::scale(s, n.val.data(), n.val.size());
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::mean_all(ValueId x) {
  Node n;
  n.op = Op::kMeanAll;
  n.a = x;
  n.val = Matrix(1, 1);
  n.val.v[0] = kernels::sum(val(x).data(), val(x).size()) / static_cast<double>(val(x).size());
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::sum_squares(ValueId x) {
  Node n;
  n.op = Op::kSumSquares;
  n.a = x;
  n.val = Matrix(1, 1);
  n.val.v[0] = kernels::sum_squares(val(x).data(), val(x).size());
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::sqrt_elem(ValueId x) {
  Node n;
  n.op = Op::kSqrt;
  n.a = x;
  n.val = Matrix(val(x).rows, val(x).cols);
  for (std::size_t i = 0; i < n.val.size(); ++i) {
    require(val(x).v[i] >= 0.0, "tape sqrt: negative input");
    n.val.v[i] = std::sqrt(val(x).v[i]);
  }
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::dropout(ValueId x, double rate, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "tape dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  Node n;
  n.op = Op::kDropout;
  n.a = x;
  const double keep = 1.0 - rate;
  n.aux = Matrix(val(x).rows, val(x).cols);
  for (std::size_t i = 0; i < n.aux.size(); ++i)
    n.aux.v[i] = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  n.val = Matrix(val(x).rows, val(x).cols);
  kernels::mul(val(x).data(), n.aux.data(), n.val.data(), n.val.size());
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::batch_norm(ValueId x, ValueId gamma, ValueId beta,
                                               BatchNormState& state, bool train) {
  const Matrix& xv = val(x);
  const int c = xv.cols;
  require(val(gamma).rows == 1 && val(gamma).cols == c, "tape batch_norm: bad gamma shape");
  require(val(beta).rows == 1 && val(beta).cols == c, "tape batch_norm: bad beta shape");
  require(state.running_mean.cols == c, "tape batch_norm: state width mismatch");

  Node n;
  n.op = Op::kBatchNorm;
  n.a = x;
  n.b = gamma;
  n.c = beta;
  n.scalar = train ? 1.0 : 0.0;

  Matrix mean(1, c), var(1, c);
  if (train) {
    const double inv_n = 1.0 / xv.rows;
    for (int r = 0; r < xv.rows; ++r) kernels::axpy(inv_n, xv.row(r), mean.data(), c);
    for (int r = 0; r < xv.rows; ++r)
      for (int j = 0; j < c; ++j) {
        const double d = xv.at(r, j) - mean.v[j];
        var.v[j] += inv_n * d * d;
      }
    for (int j = 0; j < c; ++j) {
      state.running_mean.v[j] =
          state.momentum * state.running_mean.v[j] + (1.0 - state.momentum) * mean.v[j];
      state.running_var.v[j] =
          state.momentum * state.running_var.v[j] + (1.0 - state.momentum) * var.v[j];
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  n.aux = Matrix(xv.rows, c);   // normalized input
  n.aux2 = Matrix(1, c);        // 1 / sqrt(var + eps)
  for (int j = 0; j < c; ++j) n.aux2.v[j] = 1.0 / std::sqrt(var.v[j] + state.eps);
  n.val = Matrix(xv.rows, c);
  for (int r = 0; r < xv.rows; ++r)
    for (int j = 0; j < c; ++j) {
      const double xhat = (xv.at(r, j) - mean.v[j]) * n.aux2.v[j];
      n.aux.at(r, j) = xhat;
      n.val.at(r, j) = val(gamma).v[j] * xhat + val(beta).v[j];
    }
  return push(std::move(n));
}

void GradientTape::backward(ValueId loss) {
  require(loss >= 0 && loss < size(), "tape backward: bad node id");
  require(val(loss).rows == 1 && val(loss).cols == 1, "tape backward: loss is not a scalar");

  std::vector<Matrix> grads(nodes_.size());
  std::vector<char> needed(nodes_.size(), 0);
  needed[loss] = 1;
  for (int i = loss; i >= 0; --i) {
    if (!needed[i]) continue;
    const Node& n = nodes_[i];
    if (n.a >= 0) needed[n.a] = 1;
    if (n.b >= 0) needed[n.b] = 1;
    if (n.c >= 0) needed[n.c] = 1;
  }
  auto grad_of = [&](int id) -> Matrix& {
    if (grads[id].size() == 0) grads[id] = Matrix(nodes_[id].val.rows, nodes_[id].val.cols);
    return grads[id];
  };
  grad_of(loss).v[0] = 1.0;

  for (int i = loss; i >= 0; --i) {
    if (!needed[i] || grads[i].size() == 0) continue;
    const Node& n = nodes_[i];
    const Matrix& g = grads[i];
    switch (n.op) {
      case Op::kConst:
        break;
      case Op::kParam:
        kernels::add(n.parameter->grad.data(), g.data(), n.parameter->grad.data(), g.size());
        break;
      case Op::kMatmul: {
        const Matrix& a = val(n.a);
        const Matrix& b = val(n.b);
        kernels::gemm_nt(g.data(), b.data(), grad_of(n.a).data(), g.rows, g.cols, b.rows);
        kernels::gemm_tn(a.data(), g.data(), grad_of(n.b).data(), a.rows, a.cols, g.cols);
        break;
      }
      case Op::kSparseMatmul: {
        Matrix& gx = grad_of(n.a);
        kernels::csr_matmul(n.sp_bwd->row_ptr.data(), n.sp_bwd->col.data(), n.sp_bwd->val.data(),
                            n.sp_bwd->rows, g.data(), g.cols, gx.data());
        break;
      }
      case Op::kAdd:
        kernels::add(grad_of(n.a).data(), g.data(), grad_of(n.a).data(), g.size());
        kernels::add(grad_of(n.b).data(), g.data(), grad_of(n.b).data(), g.size());
        break;
      case Op::kSub:
        kernels::add(grad_of(n.a).data(), g.data(), grad_of(n.a).data(), g.size());
        kernels::axpy(-1.0, g.data(), grad_of(n.b).data(), g.size());
        break;
      case Op::kMul: {
        Matrix& ga = grad_of(n.a);
        Matrix& gb = grad_of(n.b);
        for (std::size_t e = 0; e < g.size(); ++e) {
          ga.v[e] += g.v[e] * val(n.b).v[e];
          gb.v[e] += g.v[e] * val(n.a).v[e];
        }
        break;
      }
      case Op::kAddRow: {
        kernels::add(grad_of(n.a).data(), g.data(), grad_of(n.a).data(), g.size());
        Matrix& gr = grad_of(n.b);
        for (int r = 0; r < g.rows; ++r) kernels::axpy(1.0, g.row(r), gr.data(), g.cols);
        break;
      }
      case Op::kRelu:
        kernels::relu_backward(val(n.a).data(), g.data(), grad_of(n.a).data(), g.size());
        break;
      case Op::kConcatCols: {
        Matrix& ga = grad_of(n.a);
        Matrix& gb = grad_of(n.b);
        const int ca = ga.cols;
        for (int r = 0; r < g.rows; ++r) {
          kernels::axpy(1.0, g.row(r), ga.row(r), ca);
          kernels::axpy(1.0, g.row(r) + ca, gb.row(r), gb.cols);
        }
        break;
      }
      case Op::kGatherRows: {
        Matrix& gx = grad_of(n.a);
        for (std::size_t r = 0; r < n.idx.size(); ++r)
          kernels::axpy(1.0, g.row(static_cast<int>(r)), gx.row(n.idx[r]), g.cols);
        break;
      }
      case Op::kScale:
        kernels::axpy(n.scalar, g.data(), grad_of(n.a).data(), g.size());
        break;
      case Op::kMeanAll: {
        const double go = g.v[0] / static_cast<double>(val(n.a).size());
        Matrix& gx = grad_of(n.a);
        for (std::size_t e = 0; e < gx.size(); ++e) gx.v[e] += go;
        break;
      }
      case Op::kSumSquares:
        kernels::axpy(2.0 * g.v[0], val(n.a).data(), grad_of(n.a).data(), val(n.a).size());
        break;
      case Op::kSqrt: {
        Matrix& gx = grad_of(n.a);
        for (std::size_t e = 0; e < g.size(); ++e)
          gx.v[e] += g.v[e] * 0.5 / std::max(n.val.v[e], 1e-300);
        break;
      }
      case Op::kDropout: {
        Matrix& gx = grad_of(n.a);
        for (std::size_t e = 0; e < g.size(); ++e) gx.v[e] += g.v[e] * n.aux.v[e];
        break;
      }
      case Op::kBatchNorm: {
        const Matrix& gamma = val(n.b);
        const int rows = g.rows, c = g.cols;
        Matrix& gg = grad_of(n.b);
        Matrix& gb = grad_of(n.c);
        Matrix& gx = grad_of(n.a);
        for (int r = 0; r < rows; ++r)
          for (int j = 0; j < c; ++j) {
            gg.v[j] += g.at(r, j) * n.aux.at(r, j);
            gb.v[j] += g.at(r, j);
          }
        if (n.scalar > 0.5) {
          // Train mode: gradients flow through the batch statistics.
          Matrix mean_dy(1, c), mean_dy_xhat(1, c);
          const double inv_n = 1.0 / rows;
          for (int r = 0; r < rows; ++r)
            for (int j = 0; j < c; ++j) {
              mean_dy.v[j] += inv_n * g.at(r, j);
              mean_dy_xhat.v[j] += inv_n * g.at(r, j) * n.aux.at(r, j);
            }
          for (int r = 0; r < rows; ++r)
            for (int j = 0; j < c; ++j)
              gx.at(r, j) += gamma.v[j] * n.aux2.v[j] *
                             (g.at(r, j) - mean_dy.v[j] - n.aux.at(r, j) * mean_dy_xhat.v[j]);
        } else {
          for (int r = 0; r < rows; ++r)
            for (int j = 0; j < c; ++j) gx.at(r, j) += gamma.v[j] * n.aux2.v[j] * g.at(r, j);
        }
        break;
      }
    }
  }
}

}  // namespace pgrec
