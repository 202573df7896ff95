#include "dlnlab/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace dlnlab {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;

CMap view(const Array& a) { return CMap(a.data.data(), a.shape.rows, a.shape.cols); }
Map view(Array& a) { return Map(a.data.data(), a.shape.rows, a.shape.cols); }

}  // namespace

const Shape& Tensor::shape() const { return tape_->node(id_).value.shape; }
const Array& Tensor::value() const { return tape_->node(id_).value; }
const Array& Tensor::grad() const { return tape_->node(id_).grad; }
bool Tensor::requires_grad() const { return tape_->node(id_).requires_grad; }

int Tape::push(Array value, bool requires_grad) {
  Node n;
  n.grad = Array::zeros(value.shape);
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_same_tape(const Tensor& t) const {
  if (t.tape_ != this) {
    throw ShapeMismatch("tensor belongs to a different tape");
  }
}

Tensor Tape::constant(Array v) { return handle(push(std::move(v), false)); }

Tensor Tape::leaf(Array v, bool requires_grad) {
  return handle(push(std::move(v), requires_grad));
}

Tensor Tape::input(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return handle(it->second);
  const int id = push(p.value, true);
  node(id).param = &p;
  node(id).back = [](Tape& tape, int self) {
    Node& n = tape.node(self);
    for (size_t k = 0; k < n.grad.data.size(); ++k) {
      n.param->grad.data[k] += n.grad.data[k];
    }
  };
  param_nodes_.emplace(&p, id);
  return handle(id);
}

Tensor Tape::matmul(Tensor a, Tensor b) {
  check_same_tape(a);
  check_same_tape(b);
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.cols != sb.rows) {
    throw ShapeMismatch("matmul " + sa.str() + " x " + sb.str());
  }
  Array out = Array::zeros({sa.rows, sb.cols});
  view(out).noalias() = view(a.value()) * view(b.value());
  const int id = push(std::move(out), a.requires_grad() || b.requires_grad());
  const int pa = a.id(), pb = b.id();
  node(id).back = [pa, pb](Tape& t, int self) {
    const Array& g = t.node(self).grad;
    Node& na = t.node(pa);
    Node& nb = t.node(pb);
    if (na.requires_grad) {
      view(na.grad).noalias() += view(g) * view(nb.value).transpose();
    }
    if (nb.requires_grad) {
      view(nb.grad).noalias() += view(na.value).transpose() * view(g);
    }
  };
  return handle(id);
}

Tensor Tape::transpose(Tensor a) {
  check_same_tape(a);
  const Shape s = a.shape();
  Array out = Array::zeros({s.cols, s.rows});
  view(out) = view(a.value()).transpose();
  const int id = push(std::move(out), a.requires_grad());
  const int pa = a.id();
  node(id).back = [pa](Tape& t, int self) {
    Node& na = t.node(pa);
    if (na.requires_grad) view(na.grad) += view(t.node(self).grad).transpose();
  };
  return handle(id);
}

Tensor Tape::add(Tensor a, Tensor b) {
  check_same_tape(a);
  check_same_tape(b);
  const Shape sa = a.shape(), sb = b.shape();
  const bool bias_row = sb.rows == 1 && sb.cols == sa.cols && sa.rows != 1;
  if (!(sa == sb || bias_row)) {
    throw ShapeMismatch("add " + sa.str() + " + " + sb.str());
  }
  Array out = a.value();
  if (bias_row) {
    view(out).rowwise() += view(b.value()).row(0);
  } else {
    view(out) += view(b.value());
  }
  const int id = push(std::move(out), a.requires_grad() || b.requires_grad());
  const int pa = a.id(), pb = b.id();
  node(id).back = [pa, pb, bias_row](Tape& t, int self) {
    const Array& g = t.node(self).grad;
    Node& na = t.node(pa);
    Node& nb = t.node(pb);
    if (na.requires_grad) view(na.grad) += view(g);
    if (nb.requires_grad) {
      if (bias_row) {
        view(nb.grad).row(0) += view(g).colwise().sum();
      } else {
        view(nb.grad) += view(g);
      }
    }
  };
  return handle(id);
}

Tensor Tape::sub(Tensor a, Tensor b) {
  check_same_tape(a);
  check_same_tape(b);
  if (!(a.shape() == b.shape())) {
    throw ShapeMismatch("sub " + a.shape().str() + " - " + b.shape().str());
  }
  Array out = a.value();
  view(out) -= view(b.value());
  const int id = push(std::move(out), a.requires_grad() || b.requires_grad());
  const int pa = a.id(), pb = b.id();
  node(id).back = [pa, pb](Tape& t, int self) {
    const Array& g = t.node(self).grad;
    Node& na = t.node(pa);
    Node& nb = t.node(pb);
    if (na.requires_grad) view(na.grad) += view(g);
    if (nb.requires_grad) view(nb.grad) -= view(g);
  };
  return handle(id);
}

Tensor Tape::mul(Tensor a, Tensor b) {
  check_same_tape(a);
  check_same_tape(b);
  if (!(a.shape() == b.shape())) {
    throw ShapeMismatch("mul " + a.shape().str() + " * " + b.shape().str());
  }
  Array out = a.value();
  view(out).array() *= view(b.value()).array();
  const int id = push(std::move(out), a.requires_grad() || b.requires_grad());
  const int pa = a.id(), pb = b.id();
  node(id).back = [pa, pb](Tape& t, int self) {
    const Array& g = t.node(self).grad;
    Node& na = t.node(pa);
    Node& nb = t.node(pb);
    if (na.requires_grad) {
      view(na.grad).array() += view(g).array() * view(nb.value).array();
    }
    if (nb.requires_grad) {
      view(nb.grad).array() += view(g).array() * view(na.value).array();
    }
  };
  return handle(id);
}

Tensor Tape::scale(Tensor a, double c) {
  check_same_tape(a);
  Array out = a.value();
  view(out) *= c;
  const int id = push(std::move(out), a.requires_grad());
  const int pa = a.id();
  node(id).back = [pa, c](Tape& t, int self) {
    Node& na = t.node(pa);
    if (na.requires_grad) view(na.grad) += c * view(t.node(self).grad);
  };
  return handle(id);
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no parts");
  int rows = 0;
  const int cols = parts.front().shape().cols;
  bool rg = false;
  for (const auto& p : parts) {
    check_same_tape(p);
    if (p.shape().cols != cols) {
      throw ShapeMismatch("concat_rows: column mismatch " + p.shape().str());
    }
    rows += p.shape().rows;
    rg = rg || p.requires_grad();
  }
  Array out = Array::zeros({rows, cols});
  int r = 0;
  std::vector<int> ids;
  std::vector<int> offsets;
  for (const auto& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(),
              out.data.begin() + static_cast<size_t>(r) * cols);
    ids.push_back(p.id());
    offsets.push_back(r);
    r += p.shape().rows;
  }
  const int id = push(std::move(out), rg);
  node(id).back = [ids, offsets, cols](Tape& t, int self) {
    const Array& g = t.node(self).grad;
    for (size_t k = 0; k < ids.size(); ++k) {
      Node& np = t.node(ids[k]);
      if (!np.requires_grad) continue;
      const size_t count = np.grad.data.size();
      const size_t base = static_cast<size_t>(offsets[k]) * cols;
      for (size_t i = 0; i < count; ++i) np.grad.data[i] += g.data[base + i];
    }
  };
  return handle(id);
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no parts");
  const int rows = parts.front().shape().rows;
  int cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    check_same_tape(p);
    if (p.shape().rows != rows) {
      throw ShapeMismatch("concat_cols: row mismatch " + p.shape().str());
    }
    cols += p.shape().cols;
    rg = rg || p.requires_grad();
  }
  Array out = Array::zeros({rows, cols});
  int c = 0;
  std::vector<int> ids;
  std::vector<int> offsets;
  for (const auto& p : parts) {
    const Shape ps = p.shape();
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < ps.cols; ++j) out.at(i, c + j) = p.value().at(i, j);
    }
    ids.push_back(p.id());
    offsets.push_back(c);
    c += ps.cols;
  }
  const int id = push(std::move(out), rg);
  node(id).back = [ids, offsets](Tape& t, int self) {
    const Array& g = t.node(self).grad;
    for (size_t k = 0; k < ids.size(); ++k) {
      Node& np = t.node(ids[k]);
      if (!np.requires_grad) continue;
      const Shape ps = np.grad.shape;
      for (int i = 0; i < ps.rows; ++i) {
        for (int j = 0; j < ps.cols; ++j) {
          np.grad.at(i, j) += g.at(i, offsets[k] + j);
        }
      }
    }
  };
  return handle(id);
}

Tensor Tape::slice_rows(Tensor a, int r0, int r1) {
  check_same_tape(a);
  const Shape s = a.shape();
  if (r0 < 0 || r1 > s.rows || r0 >= r1) {
    throw ShapeMismatch("slice_rows [" + std::to_string(r0) + ", " +
                        std::to_string(r1) + ") of " + s.str());
  }
  Array out = Array::zeros({r1 - r0, s.cols});
  std::copy(a.value().data.begin() + static_cast<size_t>(r0) * s.cols,
            a.value().data.begin() + static_cast<size_t>(r1) * s.cols,
            out.data.begin());
  const int id = push(std::move(out), a.requires_grad());
  const int pa = a.id();
  node(id).back = [pa, r0](Tape& t, int self) {
    Node& na = t.node(pa);
    if (!na.requires_grad) return;
    const Array& g = t.node(self).grad;
    const size_t base = static_cast<size_t>(r0) * na.grad.shape.cols;
    for (size_t i = 0; i < g.data.size(); ++i) na.grad.data[base + i] += g.data[i];
  };
  return handle(id);
}

Tensor Tape::slice_cols(Tensor a, int c0, int c1) {
  check_same_tape(a);
  const Shape s = a.shape();
  if (c0 < 0 || c1 > s.cols || c0 >= c1) {
    throw ShapeMismatch("slice_cols [" + std::to_string(c0) + ", " +
                        std::to_string(c1) + ") of " + s.str());
  }
  Array out = Array::zeros({s.rows, c1 - c0});
  for (int i = 0; i < s.rows; ++i) {
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = a.value().at(i, j);
  }
  const int id = push(std::move(out), a.requires_grad());
  const int pa = a.id();
  node(id).back = [pa, c0](Tape& t, int self) {
    Node& na = t.node(pa);
    if (!na.requires_grad) return;
    const Array& g = t.node(self).grad;
    for (int i = 0; i < g.shape.rows; ++i) {
      for (int j = 0; j < g.shape.cols; ++j) na.grad.at(i, c0 + j) += g.at(i, j);
    }
  };
  return handle(id);
}

Tensor Tape::gather_rows(Tensor table, std::vector<int> ids) {
  check_same_tape(table);
  const Shape s = table.shape();
  if (ids.empty()) throw ShapeMismatch("gather_rows: empty id list");
  for (int i : ids) {
    if (i < 0 || i >= s.rows) {
      throw IndexOutOfRange("gather_rows id " + std::to_string(i) + " of " +
                            s.str());
    }
  }
  Array out = Array::zeros({static_cast<int>(ids.size()), s.cols});
  for (size_t k = 0; k < ids.size(); ++k) {
    for (int j = 0; j < s.cols; ++j) {
      out.at(static_cast<int>(k), j) = table.value().at(ids[k], j);
    }
  }
  const int id = push(std::move(out), table.requires_grad());
  const int pt = table.id();
  node(id).back = [pt, ids = std::move(ids)](Tape& t, int self) {
    Node& nt = t.node(pt);
    if (!nt.requires_grad) return;
    const Array& g = t.node(self).grad;
    for (size_t k = 0; k < ids.size(); ++k) {
      for (int j = 0; j < g.shape.cols; ++j) {
        nt.grad.at(ids[k], j) += g.at(static_cast<int>(k), j);
      }
    }
  };
  return handle(id);
}

Tensor Tape::softmax(Tensor a) {
  check_same_tape(a);
  const Shape s = a.shape();
  Array out = a.value();
  for (int i = 0; i < s.rows; ++i) {
    double mx = out.at(i, 0);
    for (int j = 1; j < s.cols; ++j) mx = std::max(mx, out.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < s.cols; ++j) {
      const double e = std::exp(out.at(i, j) - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < s.cols; ++j) out.at(i, j) /= sum;
  }
  const int id = push(std::move(out), a.requires_grad());
  const int pa = a.id();
  node(id).back = [pa](Tape& t, int self) {
    Node& na = t.node(pa);
    if (!na.requires_grad) return;
    const Array& y = t.node(self).value;
    const Array& g = t.node(self).grad;
    for (int i = 0; i < y.shape.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < y.shape.cols; ++j) dot += g.at(i, j) * y.at(i, j);
      for (int j = 0; j < y.shape.cols; ++j) {
        na.grad.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
      }
    }
  };
  return handle(id);
}

Tensor Tape::relu(Tensor a) {
  check_same_tape(a);
  Array out = a.value();
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  const int id = push(std::move(out), a.requires_grad());
  const int pa = a.id();
  node(id).back = [pa](Tape& t, int self) {
    Node& na = t.node(pa);
    if (!na.requires_grad) return;
    const Array& g = t.node(self).grad;
    for (size_t k = 0; k < g.data.size(); ++k) {
      if (na.value.data[k] > 0.0) na.grad.data[k] += g.data[k];
    }
  };
  return handle(id);
}

Tensor Tape::tanh(Tensor a) {
  check_same_tape(a);
  Array out = a.value();
  for (auto& v : out.data) v = std::tanh(v);
  const int id = push(std::move(out), a.requires_grad());
  const int pa = a.id();
  node(id).back = [pa](Tape& t, int self) {
    Node& na = t.node(pa);
    if (!na.requires_grad) return;
    const Array& y = t.node(self).value;
    const Array& g = t.node(self).grad;
    for (size_t k = 0; k < g.data.size(); ++k) {
      na.grad.data[k] += g.data[k] * (1.0 - y.data[k] * y.data[k]);
    }
  };
  return handle(id);
}

Tensor Tape::sigmoid(Tensor a) {
  check_same_tape(a);
  Array out = a.value();
  for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  const int id = push(std::move(out), a.requires_grad());
  const int pa = a.id();
  node(id).back = [pa](Tape& t, int self) {
    Node& na = t.node(pa);
    if (!na.requires_grad) return;
    const Array& y = t.node(self).value;
    const Array& g = t.node(self).grad;
    for (size_t k = 0; k < g.data.size(); ++k) {
      na.grad.data[k] += g.data[k] * y.data[k] * (1.0 - y.data[k]);
    }
  };
  return handle(id);
}

Tensor Tape::abs(Tensor a) {
  check_same_tape(a);
  Array out = a.value();
  for (auto& v : out.data) v = std::fabs(v);
  const int id = push(std::move(out), a.requires_grad());
  const int pa = a.id();
  node(id).back = [pa](Tape& t, int self) {
    Node& na = t.node(pa);
    if (!na.requires_grad) return;
    const Array& g = t.node(self).grad;
    for (size_t k = 0; k < g.data.size(); ++k) {
      const double x = na.value.data[k];
      // subgradient at exactly 0 is 0
      if (x > 0.0) {
        na.grad.data[k] += g.data[k];
      } else if (x < 0.0) {
        na.grad.data[k] -= g.data[k];
      }
    }
  };
  return handle(id);
}

Tensor Tape::layer_norm(Tensor a, Tensor gain, Tensor bias, double eps) {
  check_same_tape(a);
  check_same_tape(gain);
  check_same_tape(bias);
  const Shape s = a.shape();
  const Shape expect{1, s.cols};
  if (!(gain.shape() == expect) || !(bias.shape() == expect)) {
    throw ShapeMismatch("layer_norm gain/bias must be [1, " +
                        std::to_string(s.cols) + "]");
  }
  const int n = s.cols;
  Array out = Array::zeros(s);
  Array xhat = Array::zeros(s);
  std::vector<double> inv_std(static_cast<size_t>(s.rows));
  for (int i = 0; i < s.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += a.value().at(i, j);
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = a.value().at(i, j) - mean;
      var += d * d;
    }
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(i)] = is;
    for (int j = 0; j < n; ++j) {
      const double xh = (a.value().at(i, j) - mean) * is;
      xhat.at(i, j) = xh;
      out.at(i, j) = xh * gain.value().at(0, j) + bias.value().at(0, j);
    }
  }
  const int id = push(std::move(out),
                      a.requires_grad() || gain.requires_grad() || bias.requires_grad());
  const int pa = a.id(), pg = gain.id(), pb = bias.id();
  node(id).back = [pa, pg, pb, xhat = std::move(xhat),
                   inv_std = std::move(inv_std)](Tape& t, int self) {
    const Array& g = t.node(self).grad;
    Node& na = t.node(pa);
    Node& ng = t.node(pg);
    Node& nb = t.node(pb);
    const int rows = g.shape.rows, n = g.shape.cols;
    for (int i = 0; i < rows; ++i) {
      if (ng.requires_grad || nb.requires_grad) {
        for (int j = 0; j < n; ++j) {
          if (ng.requires_grad) ng.grad.at(0, j) += g.at(i, j) * xhat.at(i, j);
          if (nb.requires_grad) nb.grad.at(0, j) += g.at(i, j);
        }
      }
      if (na.requires_grad) {
        // dxhat = g * gain; dx = inv_std * (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int j = 0; j < n; ++j) {
          const double dxh = g.at(i, j) * ng.value.at(0, j);
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * xhat.at(i, j);
        }
        mean_dxhat /= n;
        mean_dxhat_xhat /= n;
        const double is = inv_std[static_cast<size_t>(i)];
        for (int j = 0; j < n; ++j) {
          const double dxh = g.at(i, j) * ng.value.at(0, j);
          na.grad.at(i, j) +=
              is * (dxh - mean_dxhat - xhat.at(i, j) * mean_dxhat_xhat);
        }
      }
    }
  };
  return handle(id);
}

Tensor Tape::mean(Tensor a) {
  check_same_tape(a);
  const double n = static_cast<double>(a.shape().numel());
  double total = 0.0;
  for (double v : a.value().data) total += v;
  const int id = push(Array::scalar(total / n), a.requires_grad());
  const int pa = a.id();
  node(id).back = [pa, n](Tape& t, int self) {
    Node& na = t.node(pa);
    if (!na.requires_grad) return;
    const double g = t.node(self).grad.data[0] / n;
    for (auto& v : na.grad.data) v += g;
  };
  return handle(id);
}

Tensor Tape::sum(Tensor a) {
  check_same_tape(a);
  double total = 0.0;
  for (double v : a.value().data) total += v;
  const int id = push(Array::scalar(total), a.requires_grad());
  const int pa = a.id();
  node(id).back = [pa](Tape& t, int self) {
    Node& na = t.node(pa);
    if (!na.requires_grad) return;
    const double g = t.node(self).grad.data[0];
    for (auto& v : na.grad.data) v += g;
  };
  return handle(id);
}

Tensor Tape::mse_loss(Tensor pred, Tensor target) {
  check_same_tape(pred);
  check_same_tape(target);
  if (!(pred.shape() == target.shape())) {
    throw ShapeMismatch("mse_loss " + pred.shape().str() + " vs " +
                        target.shape().str());
  }
  const double n = static_cast<double>(pred.shape().numel());
  double total = 0.0;
  for (size_t k = 0; k < pred.value().data.size(); ++k) {
    const double d = pred.value().data[k] - target.value().data[k];
    total += d * d;
  }
  const int id = push(Array::scalar(total / n),
                      pred.requires_grad() || target.requires_grad());
  const int pp = pred.id(), pt = target.id();
  node(id).back = [pp, pt, n](Tape& t, int self) {
    const double g = t.node(self).grad.data[0];
    Node& np = t.node(pp);
    Node& nt = t.node(pt);
    for (size_t k = 0; k < np.value.data.size(); ++k) {
      const double d = 2.0 * (np.value.data[k] - nt.value.data[k]) / n * g;
      if (np.requires_grad) np.grad.data[k] += d;
      if (nt.requires_grad) nt.grad.data[k] -= d;
    }
  };
  return handle(id);
}

Tensor Tape::cross_entropy(Tensor logits, std::vector<int> target_ids) {
  check_same_tape(logits);
  const Shape s = logits.shape();
  if (static_cast<int>(target_ids.size()) != s.rows) {
    throw ShapeMismatch("cross_entropy: " + std::to_string(target_ids.size()) +
                        " targets for " + s.str());
  }
  for (int id : target_ids) {
    if (id < 0 || id >= s.cols) {
      throw IndexOutOfRange("cross_entropy target " + std::to_string(id) +
                            " outside [0, " + std::to_string(s.cols) + ")");
    }
  }
  const int batch = s.rows;
  Array probs = Array::zeros(s);
  double total = 0.0;
  for (int i = 0; i < batch; ++i) {
    double mx = logits.value().at(i, 0);
    for (int j = 1; j < s.cols; ++j) mx = std::max(mx, logits.value().at(i, j));
    double sum = 0.0;
    for (int j = 0; j < s.cols; ++j) {
      const double e = std::exp(logits.value().at(i, j) - mx);
      probs.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < s.cols; ++j) probs.at(i, j) /= sum;
    total -= logits.value().at(i, target_ids[static_cast<size_t>(i)]) - mx -
             std::log(sum);
  }
  const int id = push(Array::scalar(total / batch), logits.requires_grad());
  const int pl = logits.id();
  node(id).back = [pl, probs = std::move(probs),
                   target_ids = std::move(target_ids)](Tape& t, int self) {
    Node& nl = t.node(pl);
    if (!nl.requires_grad) return;
    const double g = t.node(self).grad.data[0];
    const int batch = probs.shape.rows;
    for (int i = 0; i < batch; ++i) {
      for (int j = 0; j < probs.shape.cols; ++j) {
        double d = probs.at(i, j);
        if (j == target_ids[static_cast<size_t>(i)]) d -= 1.0;
        nl.grad.at(i, j) += g * d / batch;
      }
    }
  };
  return handle(id);
}

void Tape::backward(Tensor loss) {
  check_same_tape(loss);
  if (loss.shape().numel() != 1) {
    throw NotScalar("backward requires a scalar loss, got " +
                    loss.shape().str());
  }
  node(loss.id()).grad.data[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = node(id);
    if (n.requires_grad && n.back) n.back(*this, id);
  }
}

}  // namespace dlnlab
