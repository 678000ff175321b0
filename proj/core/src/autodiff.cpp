#include "mva/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace mva::ad {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = false;
    return n;
}

Var leaf(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return n;
}

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    return n;
}

void backward(const Var& root) {
    if (root->value.numel() != 1)
        throw DimensionError("backward: root must be scalar, got " + root->value.shape_str());
    if (root->backward_done)
        throw NumericError("backward called twice on the same graph without a new forward pass");
    root->backward_done = true;

    // Iterative post-order DFS for the topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second)
                stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
    }
}

// ---- conv2d ----------------------------------------------------------

namespace {

void im2col(const Tensor& input, int kh, int kw, int stride, int padding,
            int hout, int wout, RowMat& col) {
    const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    col.setZero(cin * kh * kw, hout * wout);
    for (int c = 0; c < cin; ++c) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                const int row = (c * kh + i) * kw + j;
                for (int oy = 0; oy < hout; ++oy) {
                    const int iy = oy * stride + i - padding;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < wout; ++ox) {
                        const int ix = ox * stride + j - padding;
                        if (ix < 0 || ix >= w) continue;
                        col(row, oy * wout + ox) = input.at(c, iy, ix);
                    }
                }
            }
        }
    }
}

void col2im(const RowMat& col, int cin, int h, int w, int kh, int kw,
            int stride, int padding, int hout, int wout, Tensor& grad) {
    for (int c = 0; c < cin; ++c) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                const int row = (c * kh + i) * kw + j;
                for (int oy = 0; oy < hout; ++oy) {
                    const int iy = oy * stride + i - padding;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < wout; ++ox) {
                        const int ix = ox * stride + j - padding;
                        if (ix < 0 || ix >= w) continue;
                        grad.at(c, iy, ix) += col(row, oy * wout + ox);
                    }
                }
            }
        }
    }
}

}  // namespace

Var conv2d(const Var& input, const Var& kernel, int stride, int padding) {
    const Tensor& x = input->value;
    const Tensor& k = kernel->value;
    if (x.rank() != 3 || k.rank() != 4)
        throw DimensionError("conv2d: expected input [C,H,W], kernel [Co,Ci,kH,kW]");
    if (x.dim(0) != k.dim(1))
        throw DimensionError("conv2d: input channels " + std::to_string(x.dim(0)) +
                             " != kernel channels " + std::to_string(k.dim(1)));
    if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
    const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    if (kh > h + 2 * padding || kw > w + 2 * padding)
        throw DimensionError("conv2d: kernel larger than padded input");
    const int hout = (h + 2 * padding - kh) / stride + 1;
    const int wout = (w + 2 * padding - kw) / stride + 1;

    auto col = std::make_shared<RowMat>();
    im2col(x, kh, kw, stride, padding, hout, wout, *col);

    Tensor out({cout, hout, wout});
    MapMat y(out.data(), cout, hout * wout);
    ConstMapMat km(k.data(), cout, cin * kh * kw);
    y.noalias() = km * (*col);

    return make_node(std::move(out), {input, kernel},
        [col, stride, padding, cin, h, w, cout, kh, kw, hout, wout](Node& n) {
            ConstMapMat gy(n.grad.data(), cout, hout * wout);
            Var in = n.parents[0], ker = n.parents[1];
            if (ker->requires_grad) {
                MapMat gk(ker->ensure_grad().data(), cout, cin * kh * kw);
                gk.noalias() += gy * col->transpose();
            }
            if (in->requires_grad) {
                ConstMapMat km(ker->value.data(), cout, cin * kh * kw);
                RowMat gcol = km.transpose() * gy;
                col2im(gcol, cin, h, w, kh, kw, stride, padding, hout, wout,
                       in->ensure_grad());
            }
        });
}

Var bias_channels(const Var& x, const Var& bias) {
    const Tensor& v = x->value;
    if (v.rank() != 3 || bias->value.rank() != 1 || bias->value.dim(0) != v.dim(0))
        throw DimensionError("bias_channels: bias must be [C] matching input channels");
    Tensor out = v;
    const int c = v.dim(0), hw = v.dim(1) * v.dim(2);
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < hw; ++i)
            out[static_cast<std::size_t>(ch) * hw + i] += bias->value[ch];
    return make_node(std::move(out), {x, bias}, [c, hw](Node& n) {
        Var in = n.parents[0], b = n.parents[1];
        if (in->requires_grad) {
            Tensor& g = in->ensure_grad();
            for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
        }
        if (b->requires_grad) {
            Tensor& g = b->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                double s = 0;
                for (int i = 0; i < hw; ++i) s += n.grad[static_cast<std::size_t>(ch) * hw + i];
                g[ch] += s;
            }
        }
    });
}

Var maxpool2(const Var& input) {
    const Tensor& x = input->value;
    if (x.rank() != 3) throw DimensionError("maxpool2: expected [C,H,W]");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % 2 != 0 || w % 2 != 0)
        throw DimensionError("maxpool2: H and W must be even, got " + x.shape_str());
    const int ho = h / 2, wo = w / 2;
    Tensor out({c, ho, wo});
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                double best = -1e300;
                std::size_t best_idx = 0;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        std::size_t idx = (static_cast<std::size_t>(ch) * h +
                                           (2 * oy + dy)) * w + 2 * ox + dx;
                        if (x[idx] > best) {  // strict: lowest linear index wins ties
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                std::size_t o = (static_cast<std::size_t>(ch) * ho + oy) * wo + ox;
                out[o] = best;
                (*argmax)[o] = best_idx;
            }
        }
    }
    return make_node(std::move(out), {input}, [argmax](Node& n) {
        Var in = n.parents[0];
        if (!in->requires_grad) return;
        Tensor& g = in->ensure_grad();
        for (std::size_t o = 0; o < n.grad.numel(); ++o)
            g[(*argmax)[o]] += n.grad[o];
    });
}

Var upsample2(const Var& input) {
    const Tensor& x = input->value;
    if (x.rank() != 3) throw DimensionError("upsample2: expected [C,H,W]");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < 2 * h; ++y)
            for (int xx = 0; xx < 2 * w; ++xx)
                out.at(ch, y, xx) = x.at(ch, y / 2, xx / 2);
    return make_node(std::move(out), {input}, [c, h, w](Node& n) {
        Var in = n.parents[0];
        if (!in->requires_grad) return;
        Tensor& g = in->ensure_grad();
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < 2 * h; ++y)
                for (int xx = 0; xx < 2 * w; ++xx)
                    g.at(ch, y / 2, xx / 2) += n.grad.at(ch, y, xx);
    });
}

Var batchnorm(const Var& x, const Var& gamma, const Var& beta, double eps,
              BatchNormStats* stats, bool training) {
    const Tensor& v = x->value;
    if (v.rank() != 3) throw DimensionError("batchnorm: expected [C,H,W]");
    if (eps <= 0) throw NumericError("batchnorm: eps must be > 0");
    const int c = v.dim(0);
    const int m = v.dim(1) * v.dim(2);
    if (gamma->value.numel() != static_cast<std::size_t>(c) ||
        beta->value.numel() != static_cast<std::size_t>(c))
        throw DimensionError("batchnorm: gamma/beta must be [C]");

    Tensor mean({c}), var({c});
    if (training) {
        for (int ch = 0; ch < c; ++ch) {
            double mu = 0;
            for (int i = 0; i < m; ++i) mu += v[static_cast<std::size_t>(ch) * m + i];
            mu /= m;
            double s2 = 0;
            for (int i = 0; i < m; ++i) {
                double d = v[static_cast<std::size_t>(ch) * m + i] - mu;
                s2 += d * d;
            }
            mean[ch] = mu;
            var[ch] = s2 / m;
        }
        if (stats) {
            if (!stats->initialized) {
                stats->running_mean = mean;
                stats->running_var = var;
                stats->initialized = true;
            } else {
                for (int ch = 0; ch < c; ++ch) {
                    stats->running_mean[ch] = stats->momentum * stats->running_mean[ch] +
                                              (1 - stats->momentum) * mean[ch];
                    stats->running_var[ch] = stats->momentum * stats->running_var[ch] +
                                             (1 - stats->momentum) * var[ch];
                }
            }
        }
    } else {
        if (!stats || !stats->initialized)
            throw NumericError("batchnorm: inference mode without running statistics");
        mean = stats->running_mean;
        var = stats->running_var;
    }

    auto xhat = std::make_shared<Tensor>(v.shape());
    auto inv_std = std::make_shared<Tensor>(std::vector<int>{c});
    Tensor out(v.shape());
    for (int ch = 0; ch < c; ++ch) {
        double is = 1.0 / std::sqrt(var[ch] + eps);
        (*inv_std)[ch] = is;
        for (int i = 0; i < m; ++i) {
            std::size_t idx = static_cast<std::size_t>(ch) * m + i;
            double xh = (v[idx] - mean[ch]) * is;
            (*xhat)[idx] = xh;
            out[idx] = gamma->value[ch] * xh + beta->value[ch];
        }
    }

    return make_node(std::move(out), {x, gamma, beta},
        [xhat, inv_std, c, m, training](Node& n) {
            Var in = n.parents[0], g = n.parents[1], b = n.parents[2];
            for (int ch = 0; ch < c; ++ch) {
                double sum_dy = 0, sum_dy_xhat = 0;
                for (int i = 0; i < m; ++i) {
                    std::size_t idx = static_cast<std::size_t>(ch) * m + i;
                    sum_dy += n.grad[idx];
                    sum_dy_xhat += n.grad[idx] * (*xhat)[idx];
                }
                if (g->requires_grad) g->ensure_grad()[ch] += sum_dy_xhat;
                if (b->requires_grad) b->ensure_grad()[ch] += sum_dy;
                if (in->requires_grad) {
                    Tensor& gx = in->ensure_grad();
                    double gam = g->value[ch], is = (*inv_std)[ch];
                    for (int i = 0; i < m; ++i) {
                        std::size_t idx = static_cast<std::size_t>(ch) * m + i;
                        if (training) {
                            gx[idx] += gam * is / m *
                                       (m * n.grad[idx] - sum_dy - (*xhat)[idx] * sum_dy_xhat);
                        } else {
                            gx[idx] += gam * is * n.grad[idx];
                        }
                    }
                }
            }
        });
}

Var relu(const Var& x) {
    Tensor out = x->value;
    for (auto& v : out.vec()) v = v > 0 ? v : 0.0;
    return make_node(std::move(out), {x}, [](Node& n) {
        Var in = n.parents[0];
        if (!in->requires_grad) return;
        Tensor& g = in->ensure_grad();
        for (std::size_t i = 0; i < g.numel(); ++i)
            if (in->value[i] > 0) g[i] += n.grad[i];
    });
}

Var dense(const Var& x, const Var& weight, const Var& bias) {
    const int out_dim = weight->value.dim(0);
    const int in_dim = weight->value.dim(1);
    if (static_cast<std::size_t>(in_dim) != x->value.numel())
        throw DimensionError("dense: input size " + std::to_string(x->value.numel()) +
                             " != weight columns " + std::to_string(in_dim));
    if (bias->value.numel() != static_cast<std::size_t>(out_dim))
        throw DimensionError("dense: bias size mismatch");
    Tensor out({out_dim});
    ConstMapMat wm(weight->value.data(), out_dim, in_dim);
    Eigen::Map<const Eigen::VectorXd> xv(x->value.data(), in_dim);
    Eigen::Map<Eigen::VectorXd> yv(out.data(), out_dim);
    yv.noalias() = wm * xv;
    for (int i = 0; i < out_dim; ++i) out[i] += bias->value[i];

    return make_node(std::move(out), {x, weight, bias}, [out_dim, in_dim](Node& n) {
        Var in = n.parents[0], w = n.parents[1], b = n.parents[2];
        Eigen::Map<const Eigen::VectorXd> gy(n.grad.data(), out_dim);
        if (w->requires_grad) {
            MapMat gw(w->ensure_grad().data(), out_dim, in_dim);
            Eigen::Map<const Eigen::VectorXd> xv(in->value.data(), in_dim);
            gw.noalias() += gy * xv.transpose();
        }
        if (b->requires_grad) {
            Eigen::Map<Eigen::VectorXd> gb(b->ensure_grad().data(), out_dim);
            gb += gy;
        }
        if (in->requires_grad) {
            ConstMapMat wm(w->value.data(), out_dim, in_dim);
            Eigen::Map<Eigen::VectorXd> gx(in->ensure_grad().data(), in_dim);
            gx.noalias() += wm.transpose() * gy;
        }
    });
}

Var reshape(const Var& x, std::vector<int> shape) {
    if (shape_numel(shape) != x->value.numel())
        throw DimensionError("reshape: element count mismatch");
    Tensor out(std::move(shape), x->value.vec());
    return make_node(std::move(out), {x}, [](Node& n) {
        Var in = n.parents[0];
        if (!in->requires_grad) return;
        Tensor& g = in->ensure_grad();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    });
}

Var softmax(const Var& logits) {
    const Tensor& v = logits->value;
    int rows = 1, k = static_cast<int>(v.numel());
    if (v.rank() == 2) {
        rows = v.dim(0);
        k = v.dim(1);
    }
    Tensor out(v.shape());
    for (int r = 0; r < rows; ++r) {
        const std::size_t off = static_cast<std::size_t>(r) * k;
        double mx = v[off];
        for (int i = 1; i < k; ++i) mx = std::max(mx, v[off + i]);
        double z = 0;
        for (int i = 0; i < k; ++i) {
            out[off + i] = std::exp(v[off + i] - mx);
            z += out[off + i];
        }
        for (int i = 0; i < k; ++i) out[off + i] /= z;
    }
    auto probs = std::make_shared<Tensor>(out);
    return make_node(std::move(out), {logits}, [probs, rows, k](Node& n) {
        Var in = n.parents[0];
        if (!in->requires_grad) return;
        Tensor& g = in->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const std::size_t off = static_cast<std::size_t>(r) * k;
            double dot = 0;
            for (int i = 0; i < k; ++i) dot += n.grad[off + i] * (*probs)[off + i];
            for (int i = 0; i < k; ++i)
                g[off + i] += (*probs)[off + i] * (n.grad[off + i] - dot);
        }
    });
}

Var softmax_cross_entropy(const Var& logits, int label) {
    const Tensor& v = logits->value;
    const int k = static_cast<int>(v.numel());
    if (label < 0 || label >= k)
        throw DimensionError("softmax_cross_entropy: label out of range");
    double mx = v[0];
    for (int i = 1; i < k; ++i) mx = std::max(mx, v[i]);
    double z = 0;
    for (int i = 0; i < k; ++i) z += std::exp(v[i] - mx);
    auto probs = std::make_shared<std::vector<double>>(k);
    for (int i = 0; i < k; ++i) (*probs)[i] = std::exp(v[i] - mx) / z;
    Tensor out = Tensor::scalar(-std::log(std::max((*probs)[label], 1e-300)));
    return make_node(std::move(out), {logits}, [probs, label, k](Node& n) {
        Var in = n.parents[0];
        if (!in->requires_grad) return;
        Tensor& g = in->ensure_grad();
        const double gy = n.grad[0];
        for (int i = 0; i < k; ++i)
            g[i] += gy * ((*probs)[i] - (i == label ? 1.0 : 0.0));
    });
}

Var smooth_l1(const Var& x) {
    Tensor out(x->value.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        double v = x->value[i];
        out[i] = std::abs(v) < 1.0 ? 0.5 * v * v : std::abs(v) - 0.5;
    }
    return make_node(std::move(out), {x}, [](Node& n) {
        Var in = n.parents[0];
        if (!in->requires_grad) return;
        Tensor& g = in->ensure_grad();
        for (std::size_t i = 0; i < g.numel(); ++i) {
            double v = in->value[i];
            double d = std::abs(v) < 1.0 ? v : (v > 0 ? 1.0 : -1.0);
            g[i] += n.grad[i] * d;
        }
    });
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
    return make_node(std::move(out), {a, b}, [](Node& n) {
        for (auto& p : n.parents) {
            if (!p->requires_grad) continue;
            Tensor& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "sub");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
    return make_node(std::move(out), {a, b}, [](Node& n) {
        Var pa = n.parents[0], pb = n.parents[1];
        if (pa->requires_grad) {
            Tensor& g = pa->ensure_grad();
            for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
        }
        if (pb->requires_grad) {
            Tensor& g = pb->ensure_grad();
            for (std::size_t i = 0; i < g.numel(); ++i) g[i] -= n.grad[i];
        }
    });
}

Var scale(const Var& x, double s) {
    Tensor out = x->value;
    for (auto& v : out.vec()) v *= s;
    return make_node(std::move(out), {x}, [s](Node& n) {
        Var in = n.parents[0];
        if (!in->requires_grad) return;
        Tensor& g = in->ensure_grad();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += s * n.grad[i];
    });
}

Var sum(const Var& x) {
    double s = 0;
    for (double v : x->value.vec()) s += v;
    return make_node(Tensor::scalar(s), {x}, [](Node& n) {
        Var in = n.parents[0];
        if (!in->requires_grad) return;
        Tensor& g = in->ensure_grad();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[0];
    });
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat: empty input");
    std::size_t total = 0;
    for (const auto& p : parts) total += p->value.numel();
    Tensor out({static_cast<int>(total)});
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p->value.vec().begin(), p->value.vec().end(), out.vec().begin() + off);
        off += p->value.numel();
    }
    return make_node(std::move(out), parts, [](Node& n) {
        std::size_t off = 0;
        for (auto& p : n.parents) {
            const std::size_t k = p->value.numel();
            if (p->requires_grad) {
                Tensor& g = p->ensure_grad();
                for (std::size_t i = 0; i < k; ++i) g[i] += n.grad[off + i];
            }
            off += k;
        }
    });
}

Var concat_channels(const Var& a, const Var& b) {
    const Tensor& va = a->value;
    const Tensor& vb = b->value;
    if (va.rank() != 3 || vb.rank() != 3 || va.dim(1) != vb.dim(1) ||
        va.dim(2) != vb.dim(2))
        throw DimensionError("concat_channels: spatial shape mismatch");
    Tensor out({va.dim(0) + vb.dim(0), va.dim(1), va.dim(2)});
    std::copy(va.vec().begin(), va.vec().end(), out.vec().begin());
    std::copy(vb.vec().begin(), vb.vec().end(), out.vec().begin() + va.numel());
    return make_node(std::move(out), {a, b}, [](Node& n) {
        Var pa = n.parents[0], pb = n.parents[1];
        const std::size_t na = pa->value.numel();
        if (pa->requires_grad) {
            Tensor& g = pa->ensure_grad();
            for (std::size_t i = 0; i < na; ++i) g[i] += n.grad[i];
        }
        if (pb->requires_grad) {
            Tensor& g = pb->ensure_grad();
            for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[na + i];
        }
    });
}

void Sgd::step(const std::vector<Var>& params) {
    for (const auto& p : params) {
        if (p->grad.empty()) continue;
        if (!p->grad.all_finite())
            throw NumericError("sgd_step: non-finite gradient; update rejected");
    }
    // Per-tensor clipping: one badly-conditioned parameter (in practice a
    // regression head whose input features are large) would otherwise
    // dominate a global norm and throttle the update of every other tensor.
    if (clip_norm_ > 0.0) {
        for (const auto& p : params) {
            if (p->grad.empty()) continue;
            double sq = 0.0;
            for (std::size_t i = 0; i < p->grad.numel(); ++i) sq += p->grad[i] * p->grad[i];
            const double norm = std::sqrt(sq);
            if (norm > clip_norm_) {
                const double s = clip_norm_ / norm;
                for (std::size_t i = 0; i < p->grad.numel(); ++i) p->grad[i] *= s;
            }
        }
    }
    for (const auto& p : params) {
        if (p->grad.empty()) continue;
        Tensor* vel = nullptr;
        if (momentum_ != 0.0) {
            for (auto& [node, v] : velocity_)
                if (node == p.get()) vel = &v;
            if (!vel) {
                velocity_.emplace_back(p.get(), Tensor::zeros(p->value.shape()));
                vel = &velocity_.back().second;
            }
        }
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            if (vel) {
                (*vel)[i] = momentum_ * (*vel)[i] + p->grad[i];
                p->value[i] -= lr_ * (*vel)[i];
            } else {
                p->value[i] -= lr_ * p->grad[i];
            }
        }
    }
}

void Sgd::zero_grad(const std::vector<Var>& params) {
    for (const auto& p : params)
        if (!p->grad.empty()) p->grad.fill(0.0);
}

Tensor he_init(const std::vector<int>& shape, int fan_in, Rng& rng) {
    Tensor t(shape);
    const double stddev = std::sqrt(2.0 / std::max(fan_in, 1));
    for (auto& v : t.vec()) v = rng.gaussian(0.0, stddev);
    return t;
}

}  // namespace mva::ad
