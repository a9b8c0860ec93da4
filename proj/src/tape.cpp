/*
 * Copyright 2026 The CohortNet Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cohortnet/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cohortnet/errors.hpp"
#include "cohortnet/nn.hpp"

namespace cohortnet {

namespace {
constexpr double kProbClamp = 1e-7;
}

Var Tape::push(std::vector<double> value, std::size_t rows, std::size_t cols) {
  if (spent_) throw StateError("tape: recording after backward(); call clear() first");
  Node n;
  n.value = std::move(value);
  n.rows = rows;
  n.cols = cols;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tape::Node& Tape::node(Var v) {
  if (!v.valid() || v.id >= nodes_.size()) throw StateError("tape: invalid variable");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw StateError("tape: invalid variable");
  return nodes_[v.id];
}

void Tape::require_same_size(Var a, Var b, const char* op) const {
  if (node(a).value.size() != node(b).value.size()) {
    throw DimensionError(std::string("tape ") + op + ": size " +
                         std::to_string(node(a).value.size()) + " vs " +
                         std::to_string(node(b).value.size()));
  }
}

Var Tape::constant(std::vector<double> values) {
  const std::size_t n = values.size();
  return push(std::move(values), n, 1);
}

Var Tape::constant(std::vector<double> values, std::size_t rows, std::size_t cols) {
  if (values.size() != rows * cols) throw DimensionError("tape constant: shape mismatch");
  return push(std::move(values), rows, cols);
}

Var Tape::param(ParamStore::Entry& entry) {
  auto it = param_vars_.find(&entry);
  if (it != param_vars_.end()) return it->second;
  Var v = push(entry.value.values, entry.value.rows, entry.value.cols);
  nodes_[v.id].param = &entry;
  param_vars_.emplace(&entry, v);
  return v;
}

std::span<const double> Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
  const auto& n = node(v);
  if (n.value.size() != 1) throw DimensionError("tape: value is not a scalar");
  return n.value[0];
}

std::size_t Tape::size(Var v) const { return node(v).value.size(); }

std::span<const double> Tape::grad(Var v) const {
  if (!spent_) throw StateError("tape: no gradients before backward()");
  return node(v).grad;
}

Var Tape::add(Var a, Var b) {
  require_same_size(a, b, "add");
  const auto& va = node(a).value;
  const auto& vb = node(b).value;
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  Var r = push(std::move(out), va.size(), 1);
  nodes_[r.id].back = [this, a, b, r] {
    const auto& g = nodes_[r.id].grad;
    auto& ga = nodes_[a.id].grad;
    auto& gb = nodes_[b.id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  };
  return r;
}

Var Tape::sub(Var a, Var b) {
  require_same_size(a, b, "sub");
  const auto& va = node(a).value;
  const auto& vb = node(b).value;
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
  Var r = push(std::move(out), va.size(), 1);
  nodes_[r.id].back = [this, a, b, r] {
    const auto& g = nodes_[r.id].grad;
    auto& ga = nodes_[a.id].grad;
    auto& gb = nodes_[b.id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  };
  return r;
}

Var Tape::mul(Var a, Var b) {
  require_same_size(a, b, "mul");
  const auto& va = node(a).value;
  const auto& vb = node(b).value;
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  Var r = push(std::move(out), va.size(), 1);
  nodes_[r.id].back = [this, a, b, r] {
    const auto& g = nodes_[r.id].grad;
    const auto& va = nodes_[a.id].value;
    const auto& vb = nodes_[b.id].value;
    auto& ga = nodes_[a.id].grad;
    auto& gb = nodes_[b.id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * vb[i];
      gb[i] += g[i] * va[i];
    }
  };
  return r;
}

Var Tape::scale(Var a, double c) {
  const auto& va = node(a).value;
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * va[i];
  Var r = push(std::move(out), va.size(), 1);
  nodes_[r.id].back = [this, a, r, c] {
    const auto& g = nodes_[r.id].grad;
    auto& ga = nodes_[a.id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  };
  return r;
}

Var Tape::sigmoid(Var a) {
  const auto& va = node(a).value;
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cohortnet::sigmoid(va[i]);
  Var r = push(std::move(out), va.size(), 1);
  nodes_[r.id].back = [this, a, r] {
    const auto& g = nodes_[r.id].grad;
    const auto& y = nodes_[r.id].value;
    auto& ga = nodes_[a.id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  };
  return r;
}

Var Tape::tanh(Var a) {
  const auto& va = node(a).value;
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(va[i]);
  Var r = push(std::move(out), va.size(), 1);
  nodes_[r.id].back = [this, a, r] {
    const auto& g = nodes_[r.id].grad;
    const auto& y = nodes_[r.id].value;
    auto& ga = nodes_[a.id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  };
  return r;
}

Var Tape::matvec(Var w, Var x) {
  const auto& nw = node(w);
  const auto& vx = node(x).value;
  const std::size_t rows = nw.rows;
  const std::size_t cols = nw.cols;
  if (vx.size() != cols) {
    throw DimensionError("tape matvec: " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " times vector of " + std::to_string(vx.size()));
  }
  std::vector<double> out(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* wr = nw.value.data() + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * vx[j];
    out[i] = acc;
  }
  Var r = push(std::move(out), rows, 1);
  nodes_[r.id].back = [this, w, x, r, rows, cols] {
    const auto& g = nodes_[r.id].grad;
    const auto& wv = nodes_[w.id].value;
    const auto& xv = nodes_[x.id].value;
    auto& gw = nodes_[w.id].grad;
    auto& gx = nodes_[x.id].grad;
    for (std::size_t i = 0; i < rows; ++i) {
      const double gi = g[i];
      if (gi == 0.0) continue;
      double* gwr = gw.data() + i * cols;
      const double* wr = wv.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) {
        gwr[j] += gi * xv[j];
        gx[j] += gi * wr[j];
      }
    }
  };
  return r;
}

Var Tape::affine(Var w, Var x, Var b) {
  const auto& nw = node(w);
  const auto& vx = node(x).value;
  const auto& vb = node(b).value;
  const std::size_t rows = nw.rows;
  const std::size_t cols = nw.cols;
  if (vx.size() != cols || vb.size() != rows) {
    throw DimensionError("tape affine: " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " with x[" + std::to_string(vx.size()) + "], b[" +
                         std::to_string(vb.size()) + "]");
  }
  std::vector<double> out(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* wr = nw.value.data() + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * vx[j];
    out[i] = acc + vb[i];
  }
  Var r = push(std::move(out), rows, 1);
  nodes_[r.id].back = [this, w, x, b, r, rows, cols] {
    const auto& g = nodes_[r.id].grad;
    const auto& wv = nodes_[w.id].value;
    const auto& xv = nodes_[x.id].value;
    auto& gw = nodes_[w.id].grad;
    auto& gx = nodes_[x.id].grad;
    auto& gb = nodes_[b.id].grad;
    for (std::size_t i = 0; i < rows; ++i) {
      const double gi = g[i];
      gb[i] += gi;
      if (gi == 0.0) continue;
      double* gwr = gw.data() + i * cols;
      const double* wr = wv.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) {
        gwr[j] += gi * xv[j];
        gx[j] += gi * wr[j];
      }
    }
  };
  return r;
}

Var Tape::row(Var w, std::size_t rix) {
  const auto& nw = node(w);
  if (rix >= nw.rows) throw DimensionError("tape row: index out of range");
  const std::size_t cols = nw.cols;
  std::vector<double> out(nw.value.begin() + rix * cols, nw.value.begin() + (rix + 1) * cols);
  Var r = push(std::move(out), cols, 1);
  nodes_[r.id].back = [this, w, r, rix, cols] {
    const auto& g = nodes_[r.id].grad;
    auto& gw = nodes_[w.id].grad;
    for (std::size_t j = 0; j < cols; ++j) gw[rix * cols + j] += g[j];
  };
  return r;
}

Var Tape::blend_rows(Var wa, Var wb, std::size_t rix, double ca, double cb) {
  const auto& na = node(wa);
  const auto& nb = node(wb);
  if (na.rows != nb.rows || na.cols != nb.cols || rix >= na.rows) {
    throw DimensionError("tape blend_rows: shape mismatch");
  }
  const std::size_t cols = na.cols;
  std::vector<double> out(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    out[j] = ca * na.value[rix * cols + j] + cb * nb.value[rix * cols + j];
  }
  Var r = push(std::move(out), cols, 1);
  nodes_[r.id].back = [this, wa, wb, r, rix, cols, ca, cb] {
    const auto& g = nodes_[r.id].grad;
    auto& ga = nodes_[wa.id].grad;
    auto& gb = nodes_[wb.id].grad;
    for (std::size_t j = 0; j < cols; ++j) {
      ga[rix * cols + j] += ca * g[j];
      gb[rix * cols + j] += cb * g[j];
    }
  };
  return r;
}

Var Tape::concat(std::span<const Var> parts) {
  std::vector<double> out;
  std::vector<Var> ids(parts.begin(), parts.end());
  for (Var p : ids) {
    const auto& v = node(p).value;
    out.insert(out.end(), v.begin(), v.end());
  }
  const std::size_t n = out.size();
  Var r = push(std::move(out), n, 1);
  nodes_[r.id].back = [this, ids = std::move(ids), r] {
    const auto& g = nodes_[r.id].grad;
    std::size_t off = 0;
    for (Var p : ids) {
      auto& gp = nodes_[p.id].grad;
      for (std::size_t j = 0; j < gp.size(); ++j) gp[j] += g[off + j];
      off += gp.size();
    }
  };
  return r;
}

Var Tape::dot(Var a, Var b) {
  require_same_size(a, b, "dot");
  const auto& va = node(a).value;
  const auto& vb = node(b).value;
  double acc = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
  Var r = push({acc}, 1, 1);
  nodes_[r.id].back = [this, a, b, r] {
    const double g = nodes_[r.id].grad[0];
    const auto& va = nodes_[a.id].value;
    const auto& vb = nodes_[b.id].value;
    auto& ga = nodes_[a.id].grad;
    auto& gb = nodes_[b.id].grad;
    for (std::size_t i = 0; i < va.size(); ++i) {
      ga[i] += g * vb[i];
      gb[i] += g * va[i];
    }
  };
  return r;
}

Var Tape::dots(Var a, std::span<const Var> bs) {
  std::vector<Var> ids(bs.begin(), bs.end());
  std::vector<double> out(ids.size());
  const auto& va = node(a).value;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    require_same_size(a, ids[k], "dots");
    const auto& vb = node(ids[k]).value;
    double acc = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
    out[k] = acc;
  }
  const std::size_t n = out.size();
  Var r = push(std::move(out), n, 1);
  nodes_[r.id].back = [this, a, ids = std::move(ids), r] {
    const auto& g = nodes_[r.id].grad;
    const auto& va = nodes_[a.id].value;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const double gk = g[k];
      if (gk == 0.0) continue;
      const auto& vb = nodes_[ids[k].id].value;
      auto& ga = nodes_[a.id].grad;
      auto& gb = nodes_[ids[k].id].grad;
      for (std::size_t i = 0; i < va.size(); ++i) {
        ga[i] += gk * vb[i];
        gb[i] += gk * va[i];
      }
    }
  };
  return r;
}

Var Tape::softmax(Var a) {
  std::vector<double> out = cohortnet::softmax(node(a).value);
  const std::size_t n = out.size();
  Var r = push(std::move(out), n, 1);
  nodes_[r.id].back = [this, a, r] {
    const auto& g = nodes_[r.id].grad;
    const auto& y = nodes_[r.id].value;
    auto& ga = nodes_[a.id].grad;
    double gy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) gy += g[i] * y[i];
    for (std::size_t i = 0; i < y.size(); ++i) ga[i] += y[i] * (g[i] - gy);
  };
  return r;
}

Var Tape::weighted_sum(Var weights, std::span<const Var> vecs) {
  std::vector<Var> ids(vecs.begin(), vecs.end());
  const auto& w = node(weights).value;
  if (w.size() != ids.size()) throw DimensionError("tape weighted_sum: weight count mismatch");
  if (ids.empty()) throw DimensionError("tape weighted_sum: no vectors");
  const std::size_t dim = node(ids[0]).value.size();
  std::vector<double> out(dim, 0.0);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto& v = node(ids[k]).value;
    if (v.size() != dim) throw DimensionError("tape weighted_sum: vector size mismatch");
    for (std::size_t j = 0; j < dim; ++j) out[j] += w[k] * v[j];
  }
  Var r = push(std::move(out), dim, 1);
  nodes_[r.id].back = [this, weights, ids = std::move(ids), r, dim] {
    const auto& g = nodes_[r.id].grad;
    const auto& w = nodes_[weights.id].value;
    auto& gw = nodes_[weights.id].grad;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto& v = nodes_[ids[k].id].value;
      auto& gv = nodes_[ids[k].id].grad;
      double acc = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        acc += g[j] * v[j];
        gv[j] += w[k] * g[j];
      }
      gw[k] += acc;
    }
  };
  return r;
}

Var Tape::sum(std::span<const Var> parts) {
  std::vector<Var> ids(parts.begin(), parts.end());
  if (ids.empty()) throw DimensionError("tape sum: no inputs");
  const std::size_t dim = node(ids[0]).value.size();
  std::vector<double> out(dim, 0.0);
  for (Var p : ids) {
    const auto& v = node(p).value;
    if (v.size() != dim) throw DimensionError("tape sum: size mismatch");
    for (std::size_t j = 0; j < dim; ++j) out[j] += v[j];
  }
  Var r = push(std::move(out), dim, 1);
  nodes_[r.id].back = [this, ids = std::move(ids), r] {
    const auto& g = nodes_[r.id].grad;
    for (Var p : ids) {
      auto& gp = nodes_[p.id].grad;
      for (std::size_t j = 0; j < g.size(); ++j) gp[j] += g[j];
    }
  };
  return r;
}

Var Tape::gru_cell(Var w, Var u, Var b, Var x, Var h, std::size_t input, std::size_t hidden) {
  GruWeights wt{node(w).value, node(u).value, node(b).value, input, hidden};
  GruGates gates;
  std::vector<double> out = gru_cell_step(node(x).value, node(h).value, wt, &gates);
  Var r = push(std::move(out), hidden, 1);
  nodes_[r.id].back = [this, w, u, b, x, h, r, input, hidden, gates = std::move(gates)] {
    const auto& g = nodes_[r.id].grad;
    const auto& wv = nodes_[w.id].value;
    const auto& uv = nodes_[u.id].value;
    const auto& xv = nodes_[x.id].value;
    const auto& hv = nodes_[h.id].value;
    auto& gw = nodes_[w.id].grad;
    auto& gu = nodes_[u.id].grad;
    auto& gb = nodes_[b.id].grad;
    auto& gx = nodes_[x.id].grad;
    auto& gh = nodes_[h.id].grad;
    const auto& z = gates.z;
    const auto& rg = gates.r;
    const auto& n = gates.n;
    const auto& rh = gates.rh;

    std::vector<double> da_z(hidden), da_r(hidden), da_n(hidden), drh(hidden, 0.0);
    for (std::size_t j = 0; j < hidden; ++j) {
      gh[j] += g[j] * (1.0 - z[j]);
      const double dz = g[j] * (n[j] - hv[j]);
      const double dn = g[j] * z[j];
      da_z[j] = dz * z[j] * (1.0 - z[j]);
      da_n[j] = dn * (1.0 - n[j] * n[j]);
    }
    // Candidate block: row offset 2H.
    for (std::size_t j = 0; j < hidden; ++j) {
      const std::size_t rw = 2 * hidden + j;
      const double d = da_n[j];
      gb[rw] += d;
      if (d == 0.0) continue;
      for (std::size_t c = 0; c < input; ++c) {
        gw[rw * input + c] += d * xv[c];
        gx[c] += d * wv[rw * input + c];
      }
      for (std::size_t c = 0; c < hidden; ++c) {
        gu[rw * hidden + c] += d * rh[c];
        drh[c] += d * uv[rw * hidden + c];
      }
    }
    for (std::size_t j = 0; j < hidden; ++j) {
      const double dr = drh[j] * hv[j];
      gh[j] += drh[j] * rg[j];
      da_r[j] = dr * rg[j] * (1.0 - rg[j]);
    }
    auto gate_back = [&](std::size_t block, const std::vector<double>& da) {
      for (std::size_t j = 0; j < hidden; ++j) {
        const std::size_t rw = block * hidden + j;
        const double d = da[j];
        gb[rw] += d;
        if (d == 0.0) continue;
        for (std::size_t c = 0; c < input; ++c) {
          gw[rw * input + c] += d * xv[c];
          gx[c] += d * wv[rw * input + c];
        }
        for (std::size_t c = 0; c < hidden; ++c) {
          gu[rw * hidden + c] += d * hv[c];
          gh[c] += d * uv[rw * hidden + c];
        }
      }
    };
    gate_back(0, da_z);
    gate_back(1, da_r);
  };
  return r;
}

Var Tape::bce_with_logit(Var logit, double label, double weight) {
  const double l = scalar(logit);
  const double p = cohortnet::sigmoid(l);
  const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  const double loss = -(label * std::log(pc) + (1.0 - label) * std::log(1.0 - pc));
  Var r = push({weight * loss}, 1, 1);
  const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
  nodes_[r.id].back = [this, logit, r, p, label, weight, clamped] {
    if (clamped) return;
    nodes_[logit.id].grad[0] += nodes_[r.id].grad[0] * weight * (p - label);
  };
  return r;
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw StateError("backward() before any forward op was recorded");
  if (spent_) throw StateError("backward() already ran on this tape");
  if (node(loss).value.size() != 1) throw StateError("backward(): loss must be a scalar");
  for (auto& n : nodes_) n.grad.assign(n.value.size(), 0.0);
  nodes_[loss.id].grad[0] = 1.0;
  spent_ = true;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.back) continue;
    bool any = false;
    for (double g : n.grad) {
      if (g != 0.0) {
        any = true;
        break;
      }
    }
    if (any) n.back();
  }
  for (auto& n : nodes_) {
    if (!n.param) continue;
    auto& acc = n.param->grad.values;
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += n.grad[j];
  }
}

void Tape::clear() {
  nodes_.clear();
  param_vars_.clear();
  spent_ = false;
}

}  // namespace cohortnet
