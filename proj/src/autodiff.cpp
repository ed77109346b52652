#include "emo/autodiff.hpp"

#include <cmath>
#include <memory>
#include <numbers>

#include "emo/error.hpp"

namespace emo::ad {

namespace {

void check_same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw Error("autodiff: operands live on different tapes");
}

void check_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(std::string("autodiff: shape mismatch in ") + op);
  }
}

// NaN and infinities survive summation, so one vectorized reduction finds
// them. Only sums past the double range would be flagged spuriously.
bool finite(const Matrix& m) { return m.size() == 0 || std::isfinite(m.sum()); }

Matrix scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace

Var Tape::constant(Matrix value) {
  if (!finite(value)) throw Error("autodiff: non-finite constant");
  nodes_.push_back(Node{std::move(value), nullptr, {}, {}, false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::variable(Matrix value) {
  if (!finite(value)) throw Error("autodiff: non-finite variable");
  nodes_.push_back(Node{std::move(value), nullptr, {}, {}, true});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant_ref(const Matrix& value) {
  if (!finite(value)) throw Error("autodiff: non-finite constant");
  nodes_.push_back(Node{Matrix{}, &value, {}, {}, false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::variable_ref(const Matrix& value) {
  if (!finite(value)) throw Error("autodiff: non-finite variable");
  nodes_.push_back(Node{Matrix{}, &value, {}, {}, true});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  if (!finite(value)) throw Error("autodiff: non-finite intermediate value");
  bool rg = false;
  for (const Var& v : inputs) rg = rg || requires_grad(v);
  nodes_.push_back(Node{std::move(value), nullptr, {}, rg ? std::move(backward) : Backward{}, rg});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Matrix& Tape::grad_slot(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) {
    const Matrix& v = value_at(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id())];
  if (n.grad.size() == 0) return Matrix::Zero(value(v).rows(), value(v).cols());
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw Error("autodiff: root belongs to another tape");
  if (root.rows() != 1 || root.cols() != 1) throw Error("autodiff: backward root must be 1x1");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!requires_grad(root)) return;
  grad_slot(root.id()).setOnes();
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    if (!finite(n.grad)) throw Error("autodiff: non-finite gradient");
    n.backward(*this, n.grad);
  }
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  if (a.cols() != b.rows()) throw Error("autodiff: shape mismatch in matmul");
  Matrix out;
  out.noalias() = a.value() * b.value();
  const int ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return a.tape()->record(std::move(out), in, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.grad_slot(ia).noalias() += g * t.value_at(ib).transpose();
    if (t.needs_grad(ib)) t.grad_slot(ib).noalias() += t.value_at(ia).transpose() * g;
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  check_same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  const int ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return a.tape()->record(std::move(out), in, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.grad_slot(ia) += g;
    if (t.needs_grad(ib)) t.grad_slot(ib) += g;
  });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  check_same_shape(a, b, "sub");
  Matrix out = a.value() - b.value();
  const int ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return a.tape()->record(std::move(out), in, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.grad_slot(ia) += g;
    if (t.needs_grad(ib)) t.grad_slot(ib) -= g;
  });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  check_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  const int ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return a.tape()->record(std::move(out), in, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.grad_slot(ia) += g.cwiseProduct(t.value_at(ib));
    if (t.needs_grad(ib)) t.grad_slot(ib) += g.cwiseProduct(t.value_at(ia));
  });
}

Var scale(Var a, double s) {
  Matrix out = s * a.value();
  const int ia = a.id();
  const Var in[] = {a};
  return a.tape()->record(std::move(out), in, [ia, s](Tape& t, const Matrix& g) { t.grad_slot(ia) += s * g; });
}

Var add_row(Var a, Var bias) {
  check_same_tape(a, bias);
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw Error("autodiff: shape mismatch in add_row");
  Matrix out = a.value().rowwise() + bias.value().row(0);
  const int ia = a.id(), ib = bias.id();
  const Var in[] = {a, bias};
  return a.tape()->record(std::move(out), in, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.grad_slot(ia) += g;
    if (t.needs_grad(ib)) t.grad_slot(ib) += g.colwise().sum();
  });
}

Var concat_cols(Var a, Var b) {
  check_same_tape(a, b);
  if (a.rows() != b.rows()) throw Error("autodiff: shape mismatch in concat_cols");
  const Eigen::Index ca = a.cols(), cb = b.cols();
  Matrix out(a.rows(), ca + cb);
  out.leftCols(ca) = a.value();
  out.rightCols(cb) = b.value();
  const int ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return a.tape()->record(std::move(out), in, [ia, ib, ca, cb](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.grad_slot(ia) += g.leftCols(ca);
    if (t.needs_grad(ib)) t.grad_slot(ib) += g.rightCols(cb);
  });
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Var gelu(Var a) {
  Matrix out = a.value().unaryExpr([](double x) { return gelu_value(x); });
  const int ia = a.id();
  const Var in[] = {a};
  return a.tape()->record(std::move(out), in, [ia](Tape& t, const Matrix& g) {
    t.grad_slot(ia) += g.cwiseProduct(t.value_at(ia).unaryExpr([](double x) { return gelu_derivative(x); }));
  });
}

Var layer_norm(Var x, Var gain, Var offset, double eps) {
  check_same_tape(x, gain);
  check_same_tape(x, offset);
  const Eigen::Index n = x.rows(), d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || offset.rows() != 1 || offset.cols() != d) {
    throw Error("autodiff: shape mismatch in layer_norm");
  }
  auto normalized = std::make_shared<Matrix>(n, d);
  auto rstd = std::make_shared<Eigen::VectorXd>(n);
  const Matrix& xv = x.value();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    const double r = 1.0 / std::sqrt(var + eps);
    (*rstd)[i] = r;
    normalized->row(i) = (xv.row(i).array() - mu) * r;
  }
  Matrix out = (normalized->array().rowwise() * gain.value().row(0).array()).rowwise() +
               offset.value().row(0).array();
  const int ix = x.id(), ig = gain.id(), io = offset.id();
  const Var in[] = {x, gain, offset};
  return x.tape()->record(std::move(out), in, [ix, ig, io, normalized, rstd](Tape& t, const Matrix& g) {
    const Matrix& xh = *normalized;
    if (t.needs_grad(ig)) t.grad_slot(ig) += g.cwiseProduct(xh).colwise().sum();
    if (t.needs_grad(io)) t.grad_slot(io) += g.colwise().sum();
    if (t.needs_grad(ix)) {
      const Matrix gh = g.array().rowwise() * t.value_at(ig).row(0).array();
      Matrix& dx = t.grad_slot(ix);
      for (Eigen::Index i = 0; i < gh.rows(); ++i) {
        const double mean_g = gh.row(i).mean();
        const double mean_gx = gh.row(i).cwiseProduct(xh.row(i)).mean();
        dx.row(i).array() += (*rstd)[i] * (gh.row(i).array() - mean_g - xh.row(i).array() * mean_gx);
      }
    }
  });
}

Var mask(Var a, const Matrix& m) {
  if (m.rows() != a.rows() || m.cols() != a.cols()) throw Error("autodiff: shape mismatch in mask");
  Matrix out = a.value().cwiseProduct(m);
  const int ia = a.id();
  const Var in[] = {a};
  return a.tape()->record(std::move(out), in, [ia, m](Tape& t, const Matrix& g) { t.grad_slot(ia) += g.cwiseProduct(m); });
}

Var gather_rows(std::span<const Var> sources, std::span<const RowRef> rows) {
  if (sources.empty()) throw Error("autodiff: gather_rows needs at least one source");
  Tape* tape = sources[0].tape();
  const Eigen::Index d = sources[0].cols();
  for (const Var& s : sources) {
    if (s.tape() != tape) throw Error("autodiff: operands live on different tapes");
    if (s.cols() != d) throw Error("autodiff: gather_rows sources differ in width");
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const RowRef& ref = rows[r];
    if (ref.source < 0 || static_cast<std::size_t>(ref.source) >= sources.size() || ref.row < 0 ||
        ref.row >= sources[static_cast<std::size_t>(ref.source)].rows()) {
      throw Error("autodiff: gather_rows reference out of range");
    }
    out.row(static_cast<Eigen::Index>(r)) = sources[static_cast<std::size_t>(ref.source)].value().row(ref.row);
  }
  std::vector<int> ids;
  for (const Var& s : sources) ids.push_back(s.id());
  std::vector<RowRef> refs(rows.begin(), rows.end());
  return tape->record(std::move(out), sources, [ids, refs](Tape& t, const Matrix& g) {
    for (std::size_t r = 0; r < refs.size(); ++r) {
      const int id = ids[static_cast<std::size_t>(refs[r].source)];
      if (t.needs_grad(id)) t.grad_slot(id).row(refs[r].row) += g.row(static_cast<Eigen::Index>(r));
    }
  });
}

Var segment_mean(Var x, std::span<const Segment> segments) {
  Matrix out(static_cast<Eigen::Index>(segments.size()), x.cols());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& s = segments[i];
    if (s.length <= 0 || s.offset < 0 || s.offset + s.length > x.rows()) throw Error("autodiff: bad segment");
    out.row(static_cast<Eigen::Index>(i)) = x.value().middleRows(s.offset, s.length).colwise().mean();
  }
  const int ix = x.id();
  std::vector<Segment> segs(segments.begin(), segments.end());
  const Var in[] = {x};
  return x.tape()->record(std::move(out), in, [ix, segs](Tape& t, const Matrix& g) {
    Matrix& dx = t.grad_slot(ix);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const double inv = 1.0 / static_cast<double>(segs[i].length);
      dx.middleRows(segs[i].offset, segs[i].length).rowwise() += inv * g.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var segment_attention(Var qkv, std::span<const Segment> segments, int num_heads, AttentionProbe* probe) {
  if (num_heads <= 0 || qkv.cols() % (3 * num_heads) != 0) throw Error("autodiff: bad attention shape");
  const Eigen::Index d = qkv.cols() / 3;
  const Eigen::Index dh = d / num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix& v = qkv.value();
  Matrix out(v.rows(), d);
  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(segments.size() * static_cast<std::size_t>(num_heads));
  for (const Segment& s : segments) {
    if (s.length <= 0 || s.offset < 0 || s.offset + s.length > v.rows()) throw Error("autodiff: bad segment");
    for (int h = 0; h < num_heads; ++h) {
      const auto q = v.block(s.offset, h * dh, s.length, dh);
      const auto k = v.block(s.offset, d + h * dh, s.length, dh);
      const auto val = v.block(s.offset, 2 * d + h * dh, s.length, dh);
      Matrix p = (q * k.transpose()) * inv_sqrt;
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double mx = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
      }
      out.block(s.offset, h * dh, s.length, dh).noalias() = p * val;
      probs->push_back(std::move(p));
    }
  }
  if (probe != nullptr) probe->insert(probe->end(), probs->begin(), probs->end());
  const int iq = qkv.id();
  std::vector<Segment> segs(segments.begin(), segments.end());
  const Var in[] = {qkv};
  return qkv.tape()->record(std::move(out), in, [iq, segs, probs, num_heads, d, dh, inv_sqrt](Tape& t, const Matrix& g) {
    const Matrix& v = t.value_at(iq);
    Matrix& dv = t.grad_slot(iq);
    std::size_t idx = 0;
    for (const Segment& s : segs) {
      for (int h = 0; h < num_heads; ++h, ++idx) {
        const Matrix& p = (*probs)[idx];
        const auto q = v.block(s.offset, h * dh, s.length, dh);
        const auto k = v.block(s.offset, d + h * dh, s.length, dh);
        const auto val = v.block(s.offset, 2 * d + h * dh, s.length, dh);
        const auto go = g.block(s.offset, h * dh, s.length, dh);
        const Matrix dp = go * val.transpose();
        dv.block(s.offset, 2 * d + h * dh, s.length, dh).noalias() += p.transpose() * go;
        Matrix ds = p.cwiseProduct(dp);
        const Eigen::VectorXd row_dot = ds.rowwise().sum();
        ds -= p.cwiseProduct(row_dot * Eigen::RowVectorXd::Ones(p.cols()));
        ds *= inv_sqrt;
        dv.block(s.offset, h * dh, s.length, dh).noalias() += ds * k;
        dv.block(s.offset, d + h * dh, s.length, dh).noalias() += ds.transpose() * q;
      }
    }
  });
}

Var sum(Var a) {
  const int ia = a.id();
  const Var in[] = {a};
  return a.tape()->record(scalar(a.value().sum()), in,
                          [ia](Tape& t, const Matrix& g) { t.grad_slot(ia).array() += g(0, 0); });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  const int ia = a.id();
  const Var in[] = {a};
  return a.tape()->record(scalar(a.value().mean()), in,
                          [ia, n](Tape& t, const Matrix& g) { t.grad_slot(ia).array() += g(0, 0) / n; });
}

Var bce_with_logits(Var logits, std::span<const double> labels) {
  if (logits.cols() != 1 || static_cast<std::size_t>(logits.rows()) != labels.size() || labels.empty()) {
    throw Error("autodiff: shape mismatch in bce_with_logits");
  }
  const Matrix& z = logits.value();
  const double n = static_cast<double>(labels.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double x = z(i, 0);
    const double softplus = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    total += softplus - labels[static_cast<std::size_t>(i)] * x;
  }
  const int iz = logits.id();
  std::vector<double> y(labels.begin(), labels.end());
  const Var in[] = {logits};
  return logits.tape()->record(scalar(total / n), in, [iz, y, n](Tape& t, const Matrix& g) {
    const Matrix& z = t.value_at(iz);
    Matrix& dz = t.grad_slot(iz);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-z(i, 0)));
      dz(i, 0) += g(0, 0) * (p - y[static_cast<std::size_t>(i)]) / n;
    }
  });
}

Var contrastive_margin(Var a, Var b, std::span<const double> pair_labels, double margin) {
  check_same_tape(a, b);
  check_same_shape(a, b, "contrastive_margin");
  if (static_cast<std::size_t>(a.rows()) != pair_labels.size() || pair_labels.empty()) {
    throw Error("autodiff: contrastive_margin label count mismatch");
  }
  const Eigen::Index n = a.rows();
  auto ua = std::make_shared<Matrix>(n, a.cols());
  auto ub = std::make_shared<Matrix>(n, a.cols());
  auto norms = std::make_shared<Matrix>(n, 3);  // |a|, |b|, d
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double na = a.value().row(i).norm(), nb = b.value().row(i).norm();
    if (na == 0.0 || nb == 0.0) throw Error("contrastive distance undefined for a zero-norm embedding");
    ua->row(i) = a.value().row(i) / na;
    ub->row(i) = b.value().row(i) / nb;
    const double dist = (ua->row(i) - ub->row(i)).norm();
    (*norms)(i, 0) = na;
    (*norms)(i, 1) = nb;
    (*norms)(i, 2) = dist;
    const double y = pair_labels[static_cast<std::size_t>(i)];
    const double hinge = std::max(0.0, margin - dist);
    total += y * dist * dist + (1.0 - y) * hinge * hinge;
  }
  const double count = static_cast<double>(n);
  const int ia = a.id(), ib = b.id();
  std::vector<double> y(pair_labels.begin(), pair_labels.end());
  const Var in[] = {a, b};
  return a.tape()->record(scalar(total / count), in, [ia, ib, ua, ub, norms, y, margin, count](Tape& t, const Matrix& g) {
    const double scale_out = g(0, 0) / count;
    for (Eigen::Index i = 0; i < ua->rows(); ++i) {
      const Eigen::RowVectorXd diff = ua->row(i) - ub->row(i);
      const double dist = (*norms)(i, 2);
      const double yi = y[static_cast<std::size_t>(i)];
      double coef = 2.0 * yi;
      if (dist > 0.0 && dist < margin) coef += (1.0 - yi) * (-2.0 * (margin - dist) / dist);
      const Eigen::RowVectorXd gdiff = scale_out * coef * diff;
      // d(x/|x|)/dx applied to an upstream row vector r: (r - (r.u) u) / |x|.
      if (t.needs_grad(ia)) {
        const Eigen::RowVectorXd u = ua->row(i);
        t.grad_slot(ia).row(i) += (gdiff - gdiff.dot(u) * u) / (*norms)(i, 0);
      }
      if (t.needs_grad(ib)) {
        const Eigen::RowVectorXd u = ub->row(i);
        t.grad_slot(ib).row(i) -= (gdiff - gdiff.dot(u) * u) / (*norms)(i, 1);
      }
    }
  });
}

}  // namespace emo::ad
