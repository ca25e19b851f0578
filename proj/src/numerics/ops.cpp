#include "timexl/numerics/ops.hpp"

#include <algorithm>
#include <cmath>

#include "timexl/error.hpp"

namespace timexl::numerics::ops {

namespace {

using Inputs = ComputationTrace::Inputs;
using Branches = std::vector<std::int64_t>;
using GradInputs = std::span<Tensor* const>;

void requireRank(const Tensor& x, std::size_t rank, const char* op) {
    if (x.rank() != rank) {
        throw ShapeError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                         shapeString(x.shape()));
    }
}

void requireSameShape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + " shape mismatch " + shapeString(a.shape()) + " vs " +
                         shapeString(b.shape()));
    }
}

}  // namespace

Var conv1d(ComputationTrace& t, Var input, Var kernels, Var bias, Activation activation) {
    auto forward = [activation](Inputs in, Branches& br) {
        Tensor out = conv1dForward(*in[0], *in[1], *in[2], activation);
        if (activation == Activation::relu) {
            br.reserve(out.size());
            for (double v : out.values()) br.push_back(v > 0.0 ? 1 : 0);
        }
        return out;
    };
    auto backward = [activation](Inputs in, const Tensor& out, const Tensor& g, GradInputs gi) {
        const Tensor& x = *in[0];
        const Tensor& k = *in[1];
        const std::size_t filters = k.dim(0), channels = k.dim(1), width = k.dim(2);
        const std::size_t segments = out.dim(1);
        for (std::size_t o = 0; o < filters; ++o) {
            for (std::size_t j = 0; j < segments; ++j) {
                double gp = g.at(o, j);
                if (activation == Activation::relu && !(out.at(o, j) > 0.0)) gp = 0.0;
                if (gp == 0.0) continue;
                if (gi[2]) (*gi[2])[o] += gp;
                for (std::size_t c = 0; c < channels; ++c) {
                    for (std::size_t u = 0; u < width; ++u) {
                        if (gi[1]) gi[1]->at(o, c, u) += gp * x.at(c, j + u);
                        if (gi[0]) gi[0]->at(c, j + u) += gp * k.at(o, c, u);
                    }
                }
            }
        }
    };
    return t.apply("conv1d", {input, kernels, bias}, forward, backward);
}

Var pairwiseSqDist(ComputationTrace& t, Var prototypes, Var reps) {
    auto forward = [](Inputs in, Branches&) {
        const Tensor& p = *in[0];
        const Tensor& z = *in[1];
        requireRank(p, 2, "pairwiseSqDist");
        requireRank(z, 2, "pairwiseSqDist");
        if (p.dim(1) != z.dim(0)) {
            throw ShapeError("prototype dimension " + std::to_string(p.dim(1)) +
                             " does not match representation dimension " + std::to_string(z.dim(0)));
        }
        const std::size_t m = p.dim(0), d = p.dim(1), s = z.dim(1);
        Tensor out({m, s});
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < s; ++j) {
                double acc = 0.0;
                for (std::size_t r = 0; r < d; ++r) {
                    const double diff = p.at(i, r) - z.at(r, j);
                    acc += diff * diff;
                }
                out.at(i, j) = acc;
            }
        }
        return out;
    };
    auto backward = [](Inputs in, const Tensor& out, const Tensor& g, GradInputs gi) {
        const Tensor& p = *in[0];
        const Tensor& z = *in[1];
        const std::size_t m = out.dim(0), s = out.dim(1), d = p.dim(1);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < s; ++j) {
                const double gij = g.at(i, j);
                if (gij == 0.0) continue;
                for (std::size_t r = 0; r < d; ++r) {
                    const double v = 2.0 * gij * (p.at(i, r) - z.at(r, j));
                    if (gi[0]) gi[0]->at(i, r) += v;
                    if (gi[1]) gi[1]->at(r, j) -= v;
                }
            }
        }
    };
    return t.apply("pairwiseSqDist", {prototypes, reps}, forward, backward);
}

Var expNeg(ComputationTrace& t, Var x) {
    auto forward = [](Inputs in, Branches&) {
        Tensor out = *in[0];
        for (double& v : out.values()) v = std::exp(-v);
        return out;
    };
    auto backward = [](Inputs, const Tensor& out, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        for (std::size_t i = 0; i < out.size(); ++i) (*gi[0])[i] -= g[i] * out[i];
    };
    return t.apply("expNeg", {x}, forward, backward);
}

namespace {

// Index of the extreme entry of a strided run; first occurrence wins ties.
template <class Better>
std::size_t extremeIndex(const Tensor& x, std::size_t start, std::size_t count, std::size_t stride,
                         Better better) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < count; ++k) {
        if (better(x[start + k * stride], x[start + best * stride])) best = k;
    }
    return best;
}

template <class Better>
Var rowReduce(ComputationTrace& t, Var x, std::string_view name, Better better) {
    auto forward = [better](Inputs in, Branches& br) {
        const Tensor& m = *in[0];
        requireRank(m, 2, "row reduction");
        if (m.dim(1) == 0) throw ShapeError("row reduction over zero columns");
        Tensor out({m.dim(0)});
        for (std::size_t i = 0; i < m.dim(0); ++i) {
            const std::size_t k = extremeIndex(m, i * m.dim(1), m.dim(1), 1, better);
            out[i] = m.at(i, k);
            br.push_back(static_cast<std::int64_t>(k));
        }
        return out;
    };
    auto backward = [better](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        const Tensor& m = *in[0];
        for (std::size_t i = 0; i < m.dim(0); ++i) {
            const std::size_t k = extremeIndex(m, i * m.dim(1), m.dim(1), 1, better);
            gi[0]->at(i, k) += g[i];
        }
    };
    return t.apply(name, {x}, forward, backward);
}

}  // namespace

Var rowMax(ComputationTrace& t, Var x) {
    return rowReduce(t, x, "rowMax", [](double a, double b) { return a > b; });
}

Var rowMin(ComputationTrace& t, Var x) {
    return rowReduce(t, x, "rowMin", [](double a, double b) { return a < b; });
}

Var colMin(ComputationTrace& t, Var x) {
    auto less = [](double a, double b) { return a < b; };
    auto forward = [less](Inputs in, Branches& br) {
        const Tensor& m = *in[0];
        requireRank(m, 2, "colMin");
        if (m.dim(0) == 0) throw ShapeError("colMin over zero rows");
        Tensor out({m.dim(1)});
        for (std::size_t j = 0; j < m.dim(1); ++j) {
            const std::size_t k = extremeIndex(m, j, m.dim(0), m.dim(1), less);
            out[j] = m.at(k, j);
            br.push_back(static_cast<std::int64_t>(k));
        }
        return out;
    };
    auto backward = [less](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        const Tensor& m = *in[0];
        for (std::size_t j = 0; j < m.dim(1); ++j) {
            const std::size_t k = extremeIndex(m, j, m.dim(0), m.dim(1), less);
            gi[0]->at(k, j) += g[j];
        }
    };
    return t.apply("colMin", {x}, forward, backward);
}

Var concat(ComputationTrace& t, std::span<const Var> parts) {
    auto forward = [](Inputs in, Branches&) {
        std::vector<double> values;
        for (const Tensor* p : in) values.insert(values.end(), p->values().begin(), p->values().end());
        return Tensor::vector(std::move(values));
    };
    auto backward = [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < in.size(); ++k) {
            const std::size_t n = in[k]->size();
            if (gi[k]) {
                for (std::size_t i = 0; i < n; ++i) (*gi[k])[i] += g[offset + i];
            }
            offset += n;
        }
    };
    return t.apply("concat", std::vector<Var>(parts.begin(), parts.end()), forward, backward);
}

Var hconcat(ComputationTrace& t, std::span<const Var> parts) {
    auto forward = [](Inputs in, Branches&) {
        if (in.empty()) throw ShapeError("hconcat of nothing");
        const std::size_t rows = in[0]->dim(0);
        std::size_t cols = 0;
        for (const Tensor* p : in) {
            requireRank(*p, 2, "hconcat");
            if (p->dim(0) != rows) throw ShapeError("hconcat row mismatch");
            cols += p->dim(1);
        }
        Tensor out({rows, cols});
        std::size_t offset = 0;
        for (const Tensor* p : in) {
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < p->dim(1); ++j) out.at(i, offset + j) = p->at(i, j);
            }
            offset += p->dim(1);
        }
        return out;
    };
    auto backward = [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < in.size(); ++k) {
            const Tensor& p = *in[k];
            if (gi[k]) {
                for (std::size_t i = 0; i < p.dim(0); ++i) {
                    for (std::size_t j = 0; j < p.dim(1); ++j) gi[k]->at(i, j) += g.at(i, offset + j);
                }
            }
            offset += p.dim(1);
        }
    };
    return t.apply("hconcat", std::vector<Var>(parts.begin(), parts.end()), forward, backward);
}

Var matvec(ComputationTrace& t, Var matrix, Var vec) {
    auto forward = [](Inputs in, Branches&) {
        const Tensor& w = *in[0];
        const Tensor& v = *in[1];
        requireRank(w, 2, "matvec");
        requireRank(v, 1, "matvec");
        if (w.dim(1) != v.dim(0)) {
            throw ShapeError("matvec: matrix " + shapeString(w.shape()) + " vs vector " +
                             shapeString(v.shape()));
        }
        Tensor out({w.dim(0)});
        for (std::size_t i = 0; i < w.dim(0); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < w.dim(1); ++j) acc += w.at(i, j) * v[j];
            out[i] = acc;
        }
        return out;
    };
    auto backward = [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        const Tensor& w = *in[0];
        const Tensor& v = *in[1];
        for (std::size_t i = 0; i < w.dim(0); ++i) {
            for (std::size_t j = 0; j < w.dim(1); ++j) {
                if (gi[0]) gi[0]->at(i, j) += g[i] * v[j];
                if (gi[1]) (*gi[1])[j] += g[i] * w.at(i, j);
            }
        }
    };
    return t.apply("matvec", {matrix, vec}, forward, backward);
}

Var matmul(ComputationTrace& t, Var a, Var b) {
    auto forward = [](Inputs in, Branches&) {
        const Tensor& x = *in[0];
        const Tensor& y = *in[1];
        requireRank(x, 2, "matmul");
        requireRank(y, 2, "matmul");
        if (x.dim(1) != y.dim(0)) {
            throw ShapeError("matmul: " + shapeString(x.shape()) + " x " + shapeString(y.shape()));
        }
        const std::size_t m = x.dim(0), n = x.dim(1), p = y.dim(1);
        Tensor out({m, p});
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                const double xik = x.at(i, k);
                for (std::size_t j = 0; j < p; ++j) out.at(i, j) += xik * y.at(k, j);
            }
        }
        return out;
    };
    auto backward = [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        const Tensor& x = *in[0];
        const Tensor& y = *in[1];
        const std::size_t m = x.dim(0), n = x.dim(1), p = y.dim(1);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                for (std::size_t j = 0; j < p; ++j) {
                    const double gij = g.at(i, j);
                    if (gi[0]) gi[0]->at(i, k) += gij * y.at(k, j);
                    if (gi[1]) gi[1]->at(k, j) += gij * x.at(i, k);
                }
            }
        }
    };
    return t.apply("matmul", {a, b}, forward, backward);
}

Var transpose(ComputationTrace& t, Var x) {
    auto forward = [](Inputs in, Branches&) {
        const Tensor& m = *in[0];
        requireRank(m, 2, "transpose");
        Tensor out({m.dim(1), m.dim(0)});
        for (std::size_t i = 0; i < m.dim(0); ++i) {
            for (std::size_t j = 0; j < m.dim(1); ++j) out.at(j, i) = m.at(i, j);
        }
        return out;
    };
    auto backward = [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        const Tensor& m = *in[0];
        for (std::size_t i = 0; i < m.dim(0); ++i) {
            for (std::size_t j = 0; j < m.dim(1); ++j) gi[0]->at(i, j) += g.at(j, i);
        }
    };
    return t.apply("transpose", {x}, forward, backward);
}

Var softmax(ComputationTrace& t, Var logits) {
    auto forward = [](Inputs in, Branches&) { return numerics::softmax(*in[0]); };
    auto backward = [](Inputs, const Tensor& s, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        double inner = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) inner += g[i] * s[i];
        for (std::size_t i = 0; i < s.size(); ++i) (*gi[0])[i] += s[i] * (g[i] - inner);
    };
    return t.apply("softmax", {logits}, forward, backward);
}

Var columnSoftmax(ComputationTrace& t, Var x) {
    auto forward = [](Inputs in, Branches&) {
        const Tensor& m = *in[0];
        requireRank(m, 2, "columnSoftmax");
        Tensor out(m.shape());
        for (std::size_t j = 0; j < m.dim(1); ++j) {
            double mx = m.at(0, j);
            for (std::size_t i = 1; i < m.dim(0); ++i) mx = std::max(mx, m.at(i, j));
            double total = 0.0;
            for (std::size_t i = 0; i < m.dim(0); ++i) {
                out.at(i, j) = std::exp(m.at(i, j) - mx);
                total += out.at(i, j);
            }
            for (std::size_t i = 0; i < m.dim(0); ++i) out.at(i, j) /= total;
        }
        return out;
    };
    auto backward = [](Inputs, const Tensor& s, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        for (std::size_t j = 0; j < s.dim(1); ++j) {
            double inner = 0.0;
            for (std::size_t i = 0; i < s.dim(0); ++i) inner += g.at(i, j) * s.at(i, j);
            for (std::size_t i = 0; i < s.dim(0); ++i) gi[0]->at(i, j) += s.at(i, j) * (g.at(i, j) - inner);
        }
    };
    return t.apply("columnSoftmax", {x}, forward, backward);
}

Var softmaxCrossEntropy(ComputationTrace& t, Var logits, std::size_t target) {
    auto forward = [target](Inputs in, Branches&) {
        const Tensor& z = *in[0];
        requireRank(z, 1, "softmaxCrossEntropy");
        if (target >= z.size()) {
            throw ShapeError("cross-entropy target " + std::to_string(target) + " outside " +
                             std::to_string(z.size()) + " classes");
        }
        return Tensor::scalar(logSumExp(z.values()) - z[target]);
    };
    auto backward = [target](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        const Tensor s = numerics::softmax(*in[0]);
        const double scale = g.item();
        for (std::size_t i = 0; i < s.size(); ++i) {
            (*gi[0])[i] += scale * (s[i] - (i == target ? 1.0 : 0.0));
        }
    };
    return t.apply("softmaxCrossEntropy", {logits}, forward, backward);
}

Var meanColumns(ComputationTrace& t, Var x) {
    auto forward = [](Inputs in, Branches&) {
        const Tensor& m = *in[0];
        requireRank(m, 2, "meanColumns");
        Tensor out({m.dim(0)});
        for (std::size_t i = 0; i < m.dim(0); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m.dim(1); ++j) acc += m.at(i, j);
            out[i] = acc / static_cast<double>(m.dim(1));
        }
        return out;
    };
    auto backward = [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        const Tensor& m = *in[0];
        const double inv = 1.0 / static_cast<double>(m.dim(1));
        for (std::size_t i = 0; i < m.dim(0); ++i) {
            for (std::size_t j = 0; j < m.dim(1); ++j) gi[0]->at(i, j) += g[i] * inv;
        }
    };
    return t.apply("meanColumns", {x}, forward, backward);
}

Var sum(ComputationTrace& t, Var x) {
    auto forward = [](Inputs in, Branches&) {
        double acc = 0.0;
        for (double v : in[0]->values()) acc += v;
        return Tensor::scalar(acc);
    };
    auto backward = [](Inputs, const Tensor&, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        for (double& v : gi[0]->values()) v += g.item();
    };
    return t.apply("sum", {x}, forward, backward);
}

Var add(ComputationTrace& t, Var a, Var b) {
    auto forward = [](Inputs in, Branches&) {
        requireSameShape(*in[0], *in[1], "add");
        Tensor out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*in[1])[i];
        return out;
    };
    auto backward = [](Inputs, const Tensor&, const Tensor& g, GradInputs gi) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (!gi[k]) continue;
            for (std::size_t i = 0; i < g.size(); ++i) (*gi[k])[i] += g[i];
        }
    };
    return t.apply("add", {a, b}, forward, backward);
}

Var sub(ComputationTrace& t, Var a, Var b) {
    auto forward = [](Inputs in, Branches&) {
        requireSameShape(*in[0], *in[1], "sub");
        Tensor out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= (*in[1])[i];
        return out;
    };
    auto backward = [](Inputs, const Tensor&, const Tensor& g, GradInputs gi) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (gi[0]) (*gi[0])[i] += g[i];
            if (gi[1]) (*gi[1])[i] -= g[i];
        }
    };
    return t.apply("sub", {a, b}, forward, backward);
}

Var scale(ComputationTrace& t, Var x, double factor) {
    auto forward = [factor](Inputs in, Branches&) {
        Tensor out = *in[0];
        for (double& v : out.values()) v *= factor;
        return out;
    };
    auto backward = [factor](Inputs, const Tensor&, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += factor * g[i];
    };
    return t.apply("scale", {x}, forward, backward);
}

Var square(ComputationTrace& t, Var x) {
    auto forward = [](Inputs in, Branches&) {
        Tensor out = *in[0];
        for (double& v : out.values()) v *= v;
        return out;
    };
    auto backward = [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += 2.0 * (*in[0])[i] * g[i];
    };
    return t.apply("square", {x}, forward, backward);
}

Var abs(ComputationTrace& t, Var x) {
    auto forward = [](Inputs in, Branches& br) {
        Tensor out = *in[0];
        for (double& v : out.values()) {
            br.push_back(v > 0.0 ? 1 : (v < 0.0 ? -1 : 0));
            v = std::fabs(v);
        }
        return out;
    };
    auto backward = [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = (*in[0])[i];
            (*gi[0])[i] += (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0)) * g[i];
        }
    };
    return t.apply("abs", {x}, forward, backward);
}

Var dot(ComputationTrace& t, Var a, Var b) {
    auto forward = [](Inputs in, Branches&) {
        if (in[0]->size() != in[1]->size()) throw ShapeError("dot length mismatch");
        double acc = 0.0;
        for (std::size_t i = 0; i < in[0]->size(); ++i) acc += (*in[0])[i] * (*in[1])[i];
        return Tensor::scalar(acc);
    };
    auto backward = [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        const double s = g.item();
        for (std::size_t i = 0; i < in[0]->size(); ++i) {
            if (gi[0]) (*gi[0])[i] += s * (*in[1])[i];
            if (gi[1]) (*gi[1])[i] += s * (*in[0])[i];
        }
    };
    return t.apply("dot", {a, b}, forward, backward);
}

Var diversityHinge(ComputationTrace& t, Var prototypes, double threshold) {
    auto forward = [threshold](Inputs in, Branches& br) {
        const Tensor& p = *in[0];
        requireRank(p, 2, "diversityHinge");
        double acc = 0.0;
        for (std::size_t i = 0; i < p.dim(0); ++i) {
            for (std::size_t j = 0; j < p.dim(0); ++j) {
                if (i == j) continue;
                const double gap = threshold - sqDist(p.row(i), p.row(j));
                br.push_back(gap > 0.0 ? 1 : 0);
                if (gap > 0.0) acc += gap;
            }
        }
        return Tensor::scalar(acc);
    };
    auto backward = [threshold](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        if (!gi[0]) return;
        const Tensor& p = *in[0];
        const double s = g.item();
        const std::size_t d = p.dim(1);
        for (std::size_t i = 0; i < p.dim(0); ++i) {
            for (std::size_t j = 0; j < p.dim(0); ++j) {
                if (i == j || !(threshold - sqDist(p.row(i), p.row(j)) > 0.0)) continue;
                for (std::size_t r = 0; r < d; ++r) {
                    const double v = 2.0 * s * (p.at(i, r) - p.at(j, r));
                    gi[0]->at(i, r) -= v;
                    gi[0]->at(j, r) += v;
                }
            }
        }
    };
    return t.apply("diversityHinge", {prototypes}, forward, backward);
}

}  // namespace timexl::numerics::ops
