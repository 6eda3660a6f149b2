#include "ambiup/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace ambiup::ad {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void check_finite(const Tensor& t, const std::string& what) {
    for (double v : t.data) {
        if (!std::isfinite(v)) throw std::runtime_error("non-finite value in " + what);
    }
}

int Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&, int)> backward) {
    Node node;
    node.value = std::move(value);
    node.needs_grad = needs_grad;
    if (needs_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

void Tape::backward(int root) {
    require(val(root).numel() == 1, "backward: root must be scalar");
    for (auto& node : nodes_) {
        node.grad = Tensor(node.value.shape);
    }
    nodes_[static_cast<std::size_t>(root)].grad.data[0] = 1.0;
    for (int id = root; id >= 0; --id) {
        auto& node = nodes_[static_cast<std::size_t>(id)];
        if (node.needs_grad && node.backward) node.backward(*this, id);
    }
    // Detached nodes report zero even when a closure scattered into them.
    for (auto& node : nodes_) {
        if (!node.needs_grad) std::fill(node.grad.data.begin(), node.grad.data.end(), 0.0);
    }
}

int Tape::add(int a, int b) {
    require(val(a).same_shape(val(b)), "add: shape mismatch");
    Tensor out(val(a).shape);
    const auto& va = val(a).data;
    const auto& vb = val(b).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = va[i] + vb[i];
    return push(std::move(out), needs_grad(a) || needs_grad(b), [a, b](Tape& t, int self) {
        const auto& g = t.grad(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        auto& gb = t.grad_mut(b).data;
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    });
}

int Tape::sub(int a, int b) {
    require(val(a).same_shape(val(b)), "sub: shape mismatch");
    Tensor out(val(a).shape);
    const auto& va = val(a).data;
    const auto& vb = val(b).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = va[i] - vb[i];
    return push(std::move(out), needs_grad(a) || needs_grad(b), [a, b](Tape& t, int self) {
        const auto& g = t.grad(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        auto& gb = t.grad_mut(b).data;
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
}

int Tape::mul(int a, int b) {
    require(val(a).same_shape(val(b)), "mul: shape mismatch");
    Tensor out(val(a).shape);
    const auto& va = val(a).data;
    const auto& vb = val(b).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = va[i] * vb[i];
    return push(std::move(out), needs_grad(a) || needs_grad(b), [a, b](Tape& t, int self) {
        const auto& g = t.grad(self).data;
        const auto& va = t.val(a).data;
        const auto& vb = t.val(b).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
        auto& gb = t.grad_mut(b).data;
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    });
}

int Tape::scale(int a, double c) {
    Tensor out(val(a).shape);
    const auto& va = val(a).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = va[i] * c;
    return push(std::move(out), needs_grad(a), [a, c](Tape& t, int self) {
        const auto& g = t.grad(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
}

int Tape::add_const(int a, const Tensor& c) {
    require(val(a).same_shape(c), "add_const: shape mismatch");
    Tensor out(val(a).shape);
    const auto& va = val(a).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = va[i] + c.data[i];
    return push(std::move(out), needs_grad(a), [a](Tape& t, int self) {
        const auto& g = t.grad(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

int Tape::relu(int a) {
    Tensor out(val(a).shape);
    const auto& va = val(a).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = va[i] > 0.0 ? va[i] : 0.0;
    return push(std::move(out), needs_grad(a), [a](Tape& t, int self) {
        const auto& g = t.grad(self).data;
        const auto& va = t.val(a).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (va[i] > 0.0) ga[i] += g[i];
    });
}

int Tape::sigmoid(int a) {
    Tensor out(val(a).shape);
    const auto& va = val(a).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = 1.0 / (1.0 + std::exp(-va[i]));
    return push(std::move(out), needs_grad(a), [a](Tape& t, int self) {
        const auto& g = t.grad(self).data;
        const auto& y = t.val(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

int Tape::tanh_act(int a) {
    Tensor out(val(a).shape);
    const auto& va = val(a).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::tanh(va[i]);
    return push(std::move(out), needs_grad(a), [a](Tape& t, int self) {
        const auto& g = t.grad(self).data;
        const auto& y = t.val(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

int Tape::exp_act(int a) {
    Tensor out(val(a).shape);
    const auto& va = val(a).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::exp(va[i]);
    return push(std::move(out), needs_grad(a), [a](Tape& t, int self) {
        const auto& g = t.grad(self).data;
        const auto& y = t.val(self).data;
        auto& ga = t.grad_mut(a).data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    });
}

int Tape::matmul(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.shape.size() == 2 && tb.shape.size() == 2, "matmul: inputs must be 2-D");
    require(ta.cols() == tb.rows(), "matmul: inner dimensions differ");
    const int m = ta.rows(), k = ta.cols(), n = tb.cols();
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        const double* arow = ta.row(i);
        double* orow = out.row(i);
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = tb.row(p);
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return push(std::move(out), needs_grad(a) || needs_grad(b), [a, b, m, k, n](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.needs_grad(a)) {
            // dA = G * B^T
            const Tensor& tb2 = t.val(b);
            Tensor& ga = t.grad_mut(a);
            for (int i = 0; i < m; ++i) {
                const double* grow = g.row(i);
                double* garow = ga.row(i);
                for (int p = 0; p < k; ++p) {
                    const double* brow = tb2.row(p);
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    garow[p] += acc;
                }
            }
        }
        if (t.needs_grad(b)) {
            // dB = A^T * G
            const Tensor& ta2 = t.val(a);
            Tensor& gb = t.grad_mut(b);
            for (int i = 0; i < m; ++i) {
                const double* arow = ta2.row(i);
                const double* grow = g.row(i);
                for (int p = 0; p < k; ++p) {
                    const double av = arow[p];
                    if (av == 0.0) continue;
                    double* gbrow = gb.row(p);
                    for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
            }
        }
    });
}

int Tape::transpose(int a) {
    const Tensor& ta = val(a);
    require(ta.shape.size() == 2, "transpose: input must be 2-D");
    const int r = ta.rows(), c = ta.cols();
    Tensor out({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.data[static_cast<std::size_t>(j) * r + i] = ta.row(i)[j];
    return push(std::move(out), needs_grad(a), [a, r, c](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad_mut(a);
        for (int j = 0; j < c; ++j)
            for (int i = 0; i < r; ++i) ga.row(i)[j] += g.row(j)[i];
    });
}

int Tape::add_bias(int x, int bias) {
    const Tensor& tx = val(x);
    const Tensor& tb = val(bias);
    require(tx.shape.size() == 2 && tb.shape.size() == 2 && tb.cols() == 1, "add_bias: bad shapes");
    require(tb.rows() == tx.rows(), "add_bias: channel count mismatch");
    const int c = tx.rows(), n = tx.cols();
    Tensor out({c, n});
    for (int i = 0; i < c; ++i) {
        const double b = tb.data[static_cast<std::size_t>(i)];
        const double* xr = tx.row(i);
        double* orow = out.row(i);
        for (int j = 0; j < n; ++j) orow[j] = xr[j] + b;
    }
    return push(std::move(out), needs_grad(x) || needs_grad(bias),
                [x, bias, c, n](Tape& t, int self) {
                    const Tensor& g = t.grad(self);
                    Tensor& gx = t.grad_mut(x);
                    Tensor& gb = t.grad_mut(bias);
                    for (int i = 0; i < c; ++i) {
                        const double* grow = g.row(i);
                        double* gxrow = gx.row(i);
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) {
                            gxrow[j] += grow[j];
                            acc += grow[j];
                        }
                        gb.data[static_cast<std::size_t>(i)] += acc;
                    }
                });
}

int Tape::mean_time(int x) {
    const Tensor& tx = val(x);
    require(tx.shape.size() == 2, "mean_time: input must be 2-D");
    const int c = tx.rows(), n = tx.cols();
    Tensor out({c, 1});
    const double inv = 1.0 / n;
    for (int i = 0; i < c; ++i) {
        double acc = 0.0;
        const double* xr = tx.row(i);
        for (int j = 0; j < n; ++j) acc += xr[j];
        out.data[static_cast<std::size_t>(i)] = acc * inv;
    }
    return push(std::move(out), needs_grad(x), [x, c, n, inv](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad_mut(x);
        for (int i = 0; i < c; ++i) {
            const double gv = g.data[static_cast<std::size_t>(i)] * inv;
            double* gxrow = gx.row(i);
            for (int j = 0; j < n; ++j) gxrow[j] += gv;
        }
    });
}

int Tape::broadcast_time(int v, int t_len) {
    const Tensor& tv = val(v);
    require(tv.shape.size() == 2 && tv.cols() == 1, "broadcast_time: input must be [C x 1]");
    const int c = tv.rows();
    Tensor out({c, t_len});
    for (int i = 0; i < c; ++i) {
        const double x = tv.data[static_cast<std::size_t>(i)];
        double* orow = out.row(i);
        for (int j = 0; j < t_len; ++j) orow[j] = x;
    }
    return push(std::move(out), needs_grad(v), [v, c, t_len](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& gv = t.grad_mut(v);
        for (int i = 0; i < c; ++i) {
            const double* grow = g.row(i);
            double acc = 0.0;
            for (int j = 0; j < t_len; ++j) acc += grow[j];
            gv.data[static_cast<std::size_t>(i)] += acc;
        }
    });
}

int Tape::mul_bcast_rows(int x, int v) {
    const Tensor& tx = val(x);
    const Tensor& tv = val(v);
    require(tv.shape.size() == 2 && tv.cols() == 1 && tv.rows() == tx.rows(),
            "mul_bcast_rows: bad shapes");
    const int c = tx.rows(), n = tx.cols();
    Tensor out({c, n});
    for (int i = 0; i < c; ++i) {
        const double s = tv.data[static_cast<std::size_t>(i)];
        const double* xr = tx.row(i);
        double* orow = out.row(i);
        for (int j = 0; j < n; ++j) orow[j] = xr[j] * s;
    }
    return push(std::move(out), needs_grad(x) || needs_grad(v), [x, v, c, n](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& tx2 = t.val(x);
        const Tensor& tv2 = t.val(v);
        Tensor& gx = t.grad_mut(x);
        Tensor& gv = t.grad_mut(v);
        for (int i = 0; i < c; ++i) {
            const double s = tv2.data[static_cast<std::size_t>(i)];
            const double* grow = g.row(i);
            const double* xr = tx2.row(i);
            double* gxrow = gx.row(i);
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                gxrow[j] += grow[j] * s;
                acc += grow[j] * xr[j];
            }
            gv.data[static_cast<std::size_t>(i)] += acc;
        }
    });
}

int Tape::concat_rows(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.shape.size() == 2 && tb.shape.size() == 2 && ta.cols() == tb.cols(),
            "concat_rows: column counts differ");
    const int ra = ta.rows(), rb = tb.rows(), n = ta.cols();
    Tensor out({ra + rb, n});
    for (int i = 0; i < ra; ++i) std::copy(ta.row(i), ta.row(i) + n, out.row(i));
    for (int i = 0; i < rb; ++i) std::copy(tb.row(i), tb.row(i) + n, out.row(ra + i));
    return push(std::move(out), needs_grad(a) || needs_grad(b),
                [a, b, ra, rb, n](Tape& t, int self) {
                    const Tensor& g = t.grad(self);
                    Tensor& ga = t.grad_mut(a);
                    Tensor& gb = t.grad_mut(b);
                    for (int i = 0; i < ra; ++i) {
                        const double* grow = g.row(i);
                        double* garow = ga.row(i);
                        for (int j = 0; j < n; ++j) garow[j] += grow[j];
                    }
                    for (int i = 0; i < rb; ++i) {
                        const double* grow = g.row(ra + i);
                        double* gbrow = gb.row(i);
                        for (int j = 0; j < n; ++j) gbrow[j] += grow[j];
                    }
                });
}

int Tape::slice_rows(int x, int r0, int r1) {
    const Tensor& tx = val(x);
    require(tx.shape.size() == 2 && 0 <= r0 && r0 < r1 && r1 <= tx.rows(), "slice_rows: bad range");
    const int n = tx.cols();
    Tensor out({r1 - r0, n});
    for (int i = r0; i < r1; ++i) std::copy(tx.row(i), tx.row(i) + n, out.row(i - r0));
    return push(std::move(out), needs_grad(x), [x, r0, r1, n](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad_mut(x);
        for (int i = r0; i < r1; ++i) {
            const double* grow = g.row(i - r0);
            double* gxrow = gx.row(i);
            for (int j = 0; j < n; ++j) gxrow[j] += grow[j];
        }
    });
}

int Tape::slice_cols(int x, int c0, int c1) {
    const Tensor& tx = val(x);
    require(tx.shape.size() == 2 && 0 <= c0 && c0 < c1 && c1 <= tx.cols(), "slice_cols: bad range");
    const int r = tx.rows();
    Tensor out({r, c1 - c0});
    for (int i = 0; i < r; ++i)
        std::copy(tx.row(i) + c0, tx.row(i) + c1, out.row(i));
    return push(std::move(out), needs_grad(x), [x, c0, c1, r](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad_mut(x);
        const int n = c1 - c0;
        for (int i = 0; i < r; ++i) {
            const double* grow = g.row(i);
            double* gxrow = gx.row(i) + c0;
            for (int j = 0; j < n; ++j) gxrow[j] += grow[j];
        }
    });
}

int Tape::concat_cols(const std::vector<int>& xs) {
    require(!xs.empty(), "concat_cols: empty list");
    const int r = val(xs[0]).rows();
    int total = 0;
    bool any_grad = false;
    for (int id : xs) {
        require(val(id).shape.size() == 2 && val(id).rows() == r, "concat_cols: row counts differ");
        total += val(id).cols();
        any_grad = any_grad || needs_grad(id);
    }
    Tensor out({r, total});
    int off = 0;
    for (int id : xs) {
        const Tensor& tx = val(id);
        for (int i = 0; i < r; ++i)
            std::copy(tx.row(i), tx.row(i) + tx.cols(), out.row(i) + off);
        off += tx.cols();
    }
    std::vector<int> parents = xs;
    return push(std::move(out), any_grad, [parents, r](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        int off2 = 0;
        for (int id : parents) {
            Tensor& gx = t.grad_mut(id);
            const int n = gx.cols();
            for (int i = 0; i < r; ++i) {
                const double* grow = g.row(i) + off2;
                double* gxrow = gx.row(i);
                for (int j = 0; j < n; ++j) gxrow[j] += grow[j];
            }
            off2 += n;
        }
    });
}

int Tape::softmax_rows(int x) {
    const Tensor& tx = val(x);
    require(tx.shape.size() == 2, "softmax_rows: input must be 2-D");
    const int r = tx.rows(), n = tx.cols();
    Tensor out({r, n});
    for (int i = 0; i < r; ++i) {
        const double* xr = tx.row(i);
        double* orow = out.row(i);
        double mx = xr[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            orow[j] = std::exp(xr[j] - mx);
            sum += orow[j];
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < n; ++j) orow[j] *= inv;
    }
    return push(std::move(out), needs_grad(x), [x, r, n](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& y = t.val(self);
        Tensor& gx = t.grad_mut(x);
        for (int i = 0; i < r; ++i) {
            const double* grow = g.row(i);
            const double* yrow = y.row(i);
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += grow[j] * yrow[j];
            double* gxrow = gx.row(i);
            for (int j = 0; j < n; ++j) gxrow[j] += yrow[j] * (grow[j] - dot);
        }
    });
}

int Tape::layer_norm_cols(int x, int gamma, int beta, double eps) {
    const Tensor& tx = val(x);
    const Tensor& tg = val(gamma);
    const Tensor& tb = val(beta);
    require(tx.shape.size() == 2, "layer_norm_cols: input must be 2-D");
    require(tg.rows() == tx.rows() && tg.cols() == 1 && tb.rows() == tx.rows() && tb.cols() == 1,
            "layer_norm_cols: gamma/beta must be [C x 1]");
    const int c = tx.rows(), n = tx.cols();
    Tensor out({c, n});
    Tensor xhat({c, n});
    Tensor inv_std({1, n});
    for (int j = 0; j < n; ++j) {
        double mean = 0.0;
        for (int i = 0; i < c; ++i) mean += tx.row(i)[j];
        mean /= c;
        double var = 0.0;
        for (int i = 0; i < c; ++i) {
            const double d = tx.row(i)[j] - mean;
            var += d * d;
        }
        var /= c;
        const double istd = 1.0 / std::sqrt(var + eps);
        inv_std.data[static_cast<std::size_t>(j)] = istd;
        for (int i = 0; i < c; ++i) {
            const double xh = (tx.row(i)[j] - mean) * istd;
            xhat.row(i)[j] = xh;
            out.row(i)[j] = tg.data[static_cast<std::size_t>(i)] * xh +
                            tb.data[static_cast<std::size_t>(i)];
        }
    }
    const bool ng = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
    auto xh_store = std::make_shared<Tensor>(std::move(xhat));
    auto istd_store = std::make_shared<Tensor>(std::move(inv_std));
    return push(std::move(out), ng,
                [x, gamma, beta, c, n, xh_store, istd_store](Tape& t, int self) {
                    const Tensor& g = t.grad(self);
                    const Tensor& tg2 = t.val(gamma);
                    Tensor& gx = t.grad_mut(x);
                    Tensor& gg = t.grad_mut(gamma);
                    Tensor& gb = t.grad_mut(beta);
                    const Tensor& xh = *xh_store;
                    for (int i = 0; i < c; ++i) {
                        const double* grow = g.row(i);
                        const double* xhrow = xh.row(i);
                        double acc_g = 0.0, acc_b = 0.0;
                        for (int j = 0; j < n; ++j) {
                            acc_g += grow[j] * xhrow[j];
                            acc_b += grow[j];
                        }
                        gg.data[static_cast<std::size_t>(i)] += acc_g;
                        gb.data[static_cast<std::size_t>(i)] += acc_b;
                    }
                    for (int j = 0; j < n; ++j) {
                        double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                        for (int i = 0; i < c; ++i) {
                            const double dxh = g.row(i)[j] * tg2.data[static_cast<std::size_t>(i)];
                            mean_dxh += dxh;
                            mean_dxh_xh += dxh * xh.row(i)[j];
                        }
                        mean_dxh /= c;
                        mean_dxh_xh /= c;
                        const double istd = istd_store->data[static_cast<std::size_t>(j)];
                        for (int i = 0; i < c; ++i) {
                            const double dxh = g.row(i)[j] * tg2.data[static_cast<std::size_t>(i)];
                            gx.row(i)[j] += istd * (dxh - mean_dxh - xh.row(i)[j] * mean_dxh_xh);
                        }
                    }
                });
}

int Tape::conv1d(int x, int w, int bias, int stride, int pad_left, int pad_right) {
    const Tensor& tx = val(x);
    const Tensor& tw = val(w);
    const Tensor& tb = val(bias);
    require(tx.shape.size() == 2 && tw.shape.size() == 3, "conv1d: bad ranks");
    const int cin = tx.rows(), len = tx.cols();
    const int cout = tw.shape[0], k = tw.shape[2];
    require(tw.shape[1] == cin, "conv1d: weight Cin mismatch");
    require(tb.rows() == cout && tb.cols() == 1, "conv1d: bad bias shape");
    const int padded = len + pad_left + pad_right;
    require(padded >= k, "conv1d: input shorter than kernel");
    const int out_len = (padded - k) / stride + 1;

    Tensor out({cout, out_len});
    for (int co = 0; co < cout; ++co) {
        double* orow = out.row(co);
        const double b = tb.data[static_cast<std::size_t>(co)];
        for (int j = 0; j < out_len; ++j) orow[j] = b;
        for (int ci = 0; ci < cin; ++ci) {
            const double* xr = tx.row(ci);
            const double* wr =
                tw.data.data() + (static_cast<std::size_t>(co) * cin + ci) * k;
            for (int kk = 0; kk < k; ++kk) {
                const double wv = wr[kk];
                if (wv == 0.0) continue;
                const int shift = kk - pad_left;
                // valid output range so that j*stride + shift lies in [0, len)
                const int j_lo = shift < 0 ? (-shift + stride - 1) / stride : 0;
                const int j_hi =
                    std::min(out_len, shift > len - 1 ? 0 : (len - 1 - shift) / stride + 1);
                if (j_lo >= j_hi) continue;
                const double* xp = xr + static_cast<std::ptrdiff_t>(j_lo) * stride + shift;
                for (int j = j_lo; j < j_hi; ++j, xp += stride) orow[j] += wv * *xp;
            }
        }
    }
    return push(std::move(out), needs_grad(x) || needs_grad(w) || needs_grad(bias),
                [x, w, bias, stride, pad_left, cin, cout, k, len, out_len](Tape& t, int self) {
                    const Tensor& g = t.grad(self);
                    const Tensor& tx2 = t.val(x);
                    const Tensor& tw2 = t.val(w);
                    Tensor& gx = t.grad_mut(x);
                    Tensor& gw = t.grad_mut(w);
                    Tensor& gb = t.grad_mut(bias);
                    const bool want_x = t.needs_grad(x);
                    for (int co = 0; co < cout; ++co) {
                        const double* grow = g.row(co);
                        double acc_b = 0.0;
                        for (int j = 0; j < out_len; ++j) acc_b += grow[j];
                        gb.data[static_cast<std::size_t>(co)] += acc_b;
                        for (int ci = 0; ci < cin; ++ci) {
                            const double* xr = tx2.row(ci);
                            double* gxrow = gx.row(ci);
                            const std::size_t wbase =
                                (static_cast<std::size_t>(co) * cin + ci) * k;
                            for (int kk = 0; kk < k; ++kk) {
                                const int shift = kk - pad_left;
                                const int j_lo = shift < 0 ? (-shift + stride - 1) / stride : 0;
                                const int j_hi = std::min(
                                    out_len,
                                    shift > len - 1 ? 0 : (len - 1 - shift) / stride + 1);
                                if (j_lo >= j_hi) continue;
                                double acc_w = 0.0;
                                const double wv = tw2.data[wbase + static_cast<std::size_t>(kk)];
                                const double* xp =
                                    xr + static_cast<std::ptrdiff_t>(j_lo) * stride + shift;
                                if (want_x && wv != 0.0) {
                                    double* gxp =
                                        gxrow + static_cast<std::ptrdiff_t>(j_lo) * stride + shift;
                                    for (int j = j_lo; j < j_hi; ++j, xp += stride, gxp += stride) {
                                        acc_w += grow[j] * *xp;
                                        *gxp += wv * grow[j];
                                    }
                                } else {
                                    for (int j = j_lo; j < j_hi; ++j, xp += stride)
                                        acc_w += grow[j] * *xp;
                                }
                                gw.data[wbase + static_cast<std::size_t>(kk)] += acc_w;
                            }
                        }
                    }
                });
}

int Tape::conv_transpose1d(int x, int w, int bias, int stride, int trim_left, int trim_right) {
    const Tensor& tx = val(x);
    const Tensor& tw = val(w);
    const Tensor& tb = val(bias);
    require(tx.shape.size() == 2 && tw.shape.size() == 3, "conv_transpose1d: bad ranks");
    const int cin = tx.rows(), len = tx.cols();
    require(tw.shape[0] == cin, "conv_transpose1d: weight Cin mismatch");
    const int cout = tw.shape[1], k = tw.shape[2];
    require(tb.rows() == cout && tb.cols() == 1, "conv_transpose1d: bad bias shape");
    const int full = (len - 1) * stride + k;
    const int out_len = full - trim_left - trim_right;
    require(out_len > 0, "conv_transpose1d: trim too large");

    Tensor out({cout, out_len});
    std::vector<double> full_row(static_cast<std::size_t>(full));
    for (int co = 0; co < cout; ++co) {
        std::fill(full_row.begin(), full_row.end(), 0.0);
        for (int ci = 0; ci < cin; ++ci) {
            const double* xr = tx.row(ci);
            const double* wr =
                tw.data.data() + (static_cast<std::size_t>(ci) * cout + co) * k;
            for (int kk = 0; kk < k; ++kk) {
                const double wv = wr[kk];
                if (wv == 0.0) continue;
                double* fp = full_row.data() + kk;
                for (int t2 = 0; t2 < len; ++t2, fp += stride) *fp += wv * xr[t2];
            }
        }
        double* orow = out.row(co);
        const double b = tb.data[static_cast<std::size_t>(co)];
        for (int j = 0; j < out_len; ++j) orow[j] = full_row[static_cast<std::size_t>(j + trim_left)] + b;
    }
    return push(std::move(out), needs_grad(x) || needs_grad(w) || needs_grad(bias),
                [x, w, bias, stride, trim_left, cin, cout, k, len, full,
                 out_len](Tape& t, int self) {
                    const Tensor& g = t.grad(self);
                    const Tensor& tx2 = t.val(x);
                    const Tensor& tw2 = t.val(w);
                    Tensor& gx = t.grad_mut(x);
                    Tensor& gw = t.grad_mut(w);
                    Tensor& gb = t.grad_mut(bias);
                    std::vector<double> gfull(static_cast<std::size_t>(full));
                    for (int co = 0; co < cout; ++co) {
                        const double* grow = g.row(co);
                        double acc_b = 0.0;
                        std::fill(gfull.begin(), gfull.end(), 0.0);
                        for (int j = 0; j < out_len; ++j) {
                            gfull[static_cast<std::size_t>(j + trim_left)] = grow[j];
                            acc_b += grow[j];
                        }
                        gb.data[static_cast<std::size_t>(co)] += acc_b;
                        for (int ci = 0; ci < cin; ++ci) {
                            const double* xr = tx2.row(ci);
                            double* gxrow = gx.row(ci);
                            const std::size_t wbase =
                                (static_cast<std::size_t>(ci) * cout + co) * k;
                            for (int kk = 0; kk < k; ++kk) {
                                const double wv = tw2.data[wbase + static_cast<std::size_t>(kk)];
                                const double* gfp = gfull.data() + kk;
                                double acc_w = 0.0;
                                if (t.needs_grad(x) && wv != 0.0) {
                                    for (int t2 = 0; t2 < len; ++t2, gfp += stride) {
                                        acc_w += *gfp * xr[t2];
                                        gxrow[t2] += wv * *gfp;
                                    }
                                } else {
                                    for (int t2 = 0; t2 < len; ++t2, gfp += stride)
                                        acc_w += *gfp * xr[t2];
                                }
                                gw.data[wbase + static_cast<std::size_t>(kk)] += acc_w;
                            }
                        }
                    }
                });
}

int Tape::sum_all(int x) {
    const Tensor& tx = val(x);
    double acc = 0.0;
    for (double v : tx.data) acc += v;
    return push(Tensor::scalar(acc), needs_grad(x), [x](Tape& t, int self) {
        const double g = t.grad(self).data[0];
        auto& gx = t.grad_mut(x).data;
        for (auto& v : gx) v += g;
    });
}

int Tape::custom(Tensor value, std::vector<int> parents,
                 std::function<void(Tape&, int, const std::vector<int>&)> backward_fn) {
    bool ng = false;
    for (int p : parents) ng = ng || needs_grad(p);
    auto fn = std::move(backward_fn);
    auto ps = std::move(parents);
    return push(std::move(value), ng,
                [fn, ps](Tape& t, int self) { fn(t, self, ps); });
}

}  // namespace ambiup::ad
