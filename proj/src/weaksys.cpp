#include "wsindy/weaksys.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace wsindy {

int TrialFunction::degree() const noexcept {
    return kind == Kind::monomial ? std::accumulate(exponents.begin(), exponents.end(), 0) : 0;
}

bool TrialFunction::is_constant() const noexcept {
    if (kind == Kind::monomial) return degree() == 0;
    const bool zero_freq = std::all_of(omega.begin(), omega.end(), [](double w) { return w == 0.0; });
    return zero_freq;
}

std::string TrialFunction::label() const {
    std::ostringstream os;
    if (kind == Kind::monomial) {
        bool any = false;
        for (std::size_t i = 0; i < exponents.size(); ++i) {
            if (exponents[i] == 0) continue;
            if (any) os << '*';
            os << 'u' << (i + 1);
            if (exponents[i] > 1) os << '^' << exponents[i];
            any = true;
        }
        if (!any) os << '1';
        return os.str();
    }
    os << (kind == Kind::cosine ? "cos(" : "sin(");
    for (std::size_t i = 0; i < omega.size(); ++i) os << (i ? "+" : "") << omega[i] << "*u" << (i + 1);
    os << ')';
    return os.str();
}

std::vector<std::vector<int>> graded_monomials(std::size_t n, int max_degree) {
    std::vector<std::vector<int>> out;
    if (n == 0) return out;
    for (int deg = 0; deg <= max_degree; ++deg) {
        // Lexicographic descending within a degree: u1^deg first.
        std::vector<int> e(n, 0);
        auto rec = [&](auto&& self, std::size_t i, int left) -> void {
            if (i + 1 == n) {
                e[i] = left;
                out.push_back(e);
                return;
            }
            for (int k = left; k >= 0; --k) {
                e[i] = k;
                self(self, i + 1, left - k);
            }
        };
        rec(rec, 0, deg);
    }
    return out;
}

std::vector<TrialFunction> LibrarySpec::trial_functions() const {
    std::vector<TrialFunction> out;
    for (auto& e : graded_monomials(state_dim, poly_max_degree))
        out.push_back({TrialFunction::Kind::monomial, std::move(e), {}});
    for (const auto& w : trig_frequencies) {
        out.push_back({TrialFunction::Kind::cosine, {}, w});
        out.push_back({TrialFunction::Kind::sine, {}, w});
    }
    return out;
}

void LibrarySpec::validate(std::size_t grid_dims) const {
    if (state_dim < 1) throw std::invalid_argument("library: state_dim must be >= 1");
    if (poly_max_degree < -1) throw std::invalid_argument("library: bad polynomial degree");
    if (operators.size() < 2)
        throw std::invalid_argument("library: need a left-hand operator and at least one column operator");
    for (const auto& a : operators) {
        if (grid_dims != 0 && a.size() != grid_dims)
            throw std::invalid_argument("library: operator multi-index length differs from grid dimension");
        if (std::any_of(a.begin(), a.end(), [](int x) { return x < 0; }))
            throw std::invalid_argument("library: negative derivative order");
    }
    for (std::size_t s = 1; s < operators.size(); ++s)
        if (operators[s] == operators[0])
            throw std::invalid_argument("library: left-hand operator repeated among columns");
    for (const auto& w : trig_frequencies)
        if (w.size() != state_dim) throw std::invalid_argument("library: frequency length differs from state_dim");
}

std::string Column::label() const {
    const bool plain = std::all_of(alpha.begin(), alpha.end(), [](int a) { return a == 0; });
    if (plain) return trial.label();
    std::ostringstream os;
    os << 'D';
    for (std::size_t q = 0; q < alpha.size(); ++q) os << (q ? "," : "(") << alpha[q];
    os << ")[" << trial.label() << ']';
    return os.str();
}

ColumnIndex::ColumnIndex(const LibrarySpec& spec) {
    spec.validate(0);
    trials_ = spec.trial_functions();
    operators_ = spec.operators;
    num_ops_ = spec.operators.size() - 1;
    lookup_.assign(num_ops_ * trials_.size(), std::nullopt);
    for (std::size_t s = 1; s <= num_ops_; ++s) {
        const auto& alpha = spec.operators[s];
        const bool differentiates = std::any_of(alpha.begin(), alpha.end(), [](int a) { return a > 0; });
        for (std::size_t j = 0; j < trials_.size(); ++j) {
            if (spec.drop_constant_derivatives && differentiates && trials_[j].is_constant()) continue;
            lookup_[(s - 1) * trials_.size() + j] = columns_.size();
            columns_.push_back({s, j, alpha, trials_[j]});
        }
    }
    if (columns_.empty()) throw std::invalid_argument("library has no columns");
}

std::optional<std::size_t> ColumnIndex::position(std::size_t s, std::size_t j) const {
    if (s < 1 || s > num_ops_ || j >= trials_.size()) return std::nullopt;
    return lookup_[(s - 1) * trials_.size() + j];
}

std::optional<std::size_t> ColumnIndex::find(const MultiIndex& alpha, const TrialFunction& trial) const {
    for (std::size_t c = 0; c < columns_.size(); ++c)
        if (columns_[c].alpha == alpha && columns_[c].trial == trial) return c;
    return std::nullopt;
}

QueryLattice choose_query_points(const Grid& grid, const std::vector<int>& radii, std::size_t requested_k) {
    const std::size_t D = grid.dims();
    if (requested_k < 1) throw std::invalid_argument("choose_query_points: requested K must be >= 1");
    if (radii.size() != D) throw std::invalid_argument("choose_query_points: one radius per axis");
    std::vector<std::size_t> lo(D), hi(D), admissible(D);
    for (std::size_t q = 0; q < D; ++q) {
        const std::size_t r = static_cast<std::size_t>(radii[q]);
        if (2 * r + 1 > grid.counts[q])
            throw std::invalid_argument("choose_query_points: no admissible interior point");
        lo[q] = r;
        hi[q] = grid.counts[q] - 1 - r;
        admissible[q] = hi[q] - lo[q] + 1;
    }

    auto product = [](const std::vector<std::size_t>& c) {
        return std::accumulate(c.begin(), c.end(), std::size_t{1}, std::multiplies<>());
    };
    std::vector<std::size_t> count(D, 1);
    if (product(admissible) <= requested_k) {
        count = admissible;
    } else {
        // Balanced start, then grow the smallest axes while the budget allows.
        std::size_t base = 1;
        auto pow_d = [D](std::size_t x) {
            double p = 1.0;
            for (std::size_t q = 0; q < D; ++q) p *= static_cast<double>(x);
            return p;
        };
        while (pow_d(base + 1) <= static_cast<double>(requested_k)) ++base;
        for (std::size_t q = 0; q < D; ++q) count[q] = std::min(base, admissible[q]);
        for (bool grew = true; grew;) {
            grew = false;
            std::vector<std::size_t> order(D);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return count[a] < count[b]; });
            for (std::size_t q : order) {
                if (count[q] >= admissible[q]) continue;
                const std::size_t p = product(count);
                if (p / count[q] * (count[q] + 1) <= requested_k) {
                    ++count[q];
                    grew = true;
                    break;
                }
            }
        }
    }

    std::vector<std::vector<std::size_t>> axis_pos(D);
    for (std::size_t q = 0; q < D; ++q) {
        if (count[q] == 1) {
            axis_pos[q].push_back((lo[q] + hi[q]) / 2);
            continue;
        }
        const double span = static_cast<double>(hi[q] - lo[q]);
        for (std::size_t i = 0; i < count[q]; ++i)
            axis_pos[q].push_back(lo[q] + static_cast<std::size_t>(std::llround(span * static_cast<double>(i) /
                                                                                static_cast<double>(count[q] - 1))));
    }

    QueryLattice out;
    out.per_axis = count;
    out.axis_positions = axis_pos;
    std::vector<std::size_t> idx(D, 0);
    const std::size_t total = product(count);
    for (std::size_t k = 0; k < total; ++k) {
        std::vector<std::size_t> p(D);
        for (std::size_t q = 0; q < D; ++q) p[q] = axis_pos[q][idx[q]];
        out.points.push_back(std::move(p));
        for (std::size_t q = D; q-- > 0;) {
            if (++idx[q] < count[q]) break;
            idx[q] = 0;
        }
    }
    return out;
}

std::vector<double> eval_trial(const TrialFunction& f, const Dataset& data) {
    const std::size_t n = data.state_dim;
    const std::size_t N = data.num_points();
    std::vector<double> out(N, 1.0);
    if (f.kind == TrialFunction::Kind::monomial) {
        if (f.exponents.size() != n) throw std::invalid_argument("eval_trial: exponent length differs from state_dim");
        for (std::size_t p = 0; p < N; ++p) {
            double v = 1.0;
            for (std::size_t i = 0; i < n; ++i)
                for (int e = 0; e < f.exponents[i]; ++e) v *= data.values[p * n + i];
            out[p] = v;
        }
        return out;
    }
    if (f.omega.size() != n) throw std::invalid_argument("eval_trial: frequency length differs from state_dim");
    for (std::size_t p = 0; p < N; ++p) {
        double arg = 0.0;
        for (std::size_t i = 0; i < n; ++i) arg += f.omega[i] * data.values[p * n + i];
        out[p] = f.kind == TrialFunction::Kind::cosine ? std::cos(arg) : std::sin(arg);
    }
    return out;
}

double pairwise_dot(const double* x, const double* y, std::size_t n) noexcept {
    constexpr std::size_t kLeaf = 64;
    if (n <= kLeaf) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_dot(x, y, h) + pairwise_dot(x + h, y + h, n - h);
}

namespace {

bool is_tensor_lattice(const QueryLattice& q, std::size_t D) {
    if (q.axis_positions.size() != D) return false;
    std::size_t total = 1;
    for (const auto& a : q.axis_positions) total *= a.size();
    if (total != q.points.size()) return false;
    std::vector<std::size_t> idx(D, 0);
    for (const auto& pt : q.points) {
        for (std::size_t d = 0; d < D; ++d)
            if (pt[d] != q.axis_positions[d][idx[d]]) return false;
        for (std::size_t d = D; d-- > 0;) {
            if (++idx[d] < q.axis_positions[d].size()) break;
            idx[d] = 0;
        }
    }
    return true;
}

template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
    const unsigned T = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (T <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < T; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += T) body(i);
        });
    for (auto& th : pool) th.join();
}

// Convolves `in` along `axis` with `factor` (offset -r first) and keeps only the
// lattice lines of that axis. `shape` is updated to the output shape.
std::vector<double> contract_axis(const std::vector<double>& in, std::vector<std::size_t>& shape, std::size_t axis,
                                  const std::vector<std::size_t>& positions, const std::vector<double>& factor,
                                  unsigned threads) {
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
    const std::size_t len = shape[axis], Q = positions.size(), w = factor.size();
    const auto r = static_cast<std::ptrdiff_t>(w / 2);
    std::vector<double> out(outer * Q * inner);
    parallel_for(outer * Q, threads, [&](std::size_t oq) {
        const std::size_t o = oq / Q, i = oq % Q;
        std::vector<double> buf(w);
        const auto centre = static_cast<std::ptrdiff_t>(positions[i]);
        for (std::size_t j = 0; j < inner; ++j) {
            // F(k - off) for off = -r..r walks the input backwards from k + r.
            for (std::size_t t = 0; t < w; ++t) {
                const auto src = static_cast<std::size_t>(centre + r - static_cast<std::ptrdiff_t>(t));
                buf[t] = in[(o * len + src) * inner + j];
            }
            out[(o * Q + i) * inner + j] = pairwise_dot(factor.data(), buf.data(), w);
        }
    });
    shape[axis] = Q;
    return out;
}

// Contractions of one field, shared across operators with a common trailing order suffix.
class SeparableField {
public:
    SeparableField(const std::vector<double>& field, const std::vector<std::size_t>& counts,
                   const QueryLattice& lattice, unsigned threads)
        : field_(field), counts_(counts), lattice_(lattice), threads_(threads) {}

    const std::vector<double>& apply(const Stencil& stencil) { return suffix(stencil, 0); }

private:
    // Field contracted along axes q..D-1 with the stencil's factors.
    const std::vector<double>& suffix(const Stencil& st, std::size_t q) {
        const std::size_t D = counts_.size();
        std::vector<int> key(st.alpha.begin() + static_cast<std::ptrdiff_t>(q), st.alpha.end());
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        const std::vector<double>& in = q + 1 < D ? suffix(st, q + 1) : field_;
        std::vector<std::size_t> shape(D);
        for (std::size_t d = 0; d < D; ++d) shape[d] = d <= q ? counts_[d] : lattice_.axis_positions[d].size();
        auto out = contract_axis(in, shape, q, lattice_.axis_positions[q], st.factors[q], threads_);
        return memo_.emplace(std::move(key), std::move(out)).first->second;
    }

    const std::vector<double>& field_;
    std::vector<std::size_t> counts_;
    const QueryLattice& lattice_;
    unsigned threads_;
    std::map<std::vector<int>, std::vector<double>> memo_;
};

}  // namespace

WeakSystem assemble(const Dataset& data, const LibrarySpec& library, const std::vector<int>& radii,
                    const QueryLattice& queries, unsigned threads) {
    data.validate();
    const Grid& grid = data.grid;
    const std::size_t D = grid.dims();
    if (library.state_dim != data.state_dim)
        throw std::invalid_argument("assemble: library state_dim differs from data");
    library.validate(D);
    ColumnIndex columns(library);
    if (queries.points.empty()) throw std::invalid_argument("assemble: no query points");

    // Stencils for every operator, and the signed linear offset of each stencil entry.
    std::vector<Stencil> stencils;
    for (const auto& alpha : library.operators) stencils.push_back(build_stencil(grid, radii, alpha));
    const auto strides = grid.strides();
    const std::size_t m = support_size(radii);
    std::vector<std::ptrdiff_t> offset(m, 0);
    {
        std::vector<int> o(D);
        for (std::size_t q = 0; q < D; ++q) o[q] = -radii[q];
        for (std::size_t i = 0; i < m; ++i) {
            std::ptrdiff_t lin = 0;
            for (std::size_t q = 0; q < D; ++q)
                lin += static_cast<std::ptrdiff_t>(o[q]) * static_cast<std::ptrdiff_t>(strides[q]);
            offset[i] = lin;
            for (std::size_t q = D; q-- > 0;) {
                if (++o[q] <= radii[q]) break;
                o[q] = -radii[q];
            }
        }
    }
    for (const auto& pt : queries.points) {
        if (pt.size() != D) throw std::invalid_argument("assemble: query point dimension mismatch");
        for (std::size_t q = 0; q < D; ++q)
            if (pt[q] < static_cast<std::size_t>(radii[q]) || pt[q] + radii[q] >= grid.counts[q])
                throw std::invalid_argument("assemble: query point violates the interior condition");
    }

    // Trial fields actually referenced by some column.
    const std::size_t J = columns.num_trials();
    std::vector<std::vector<double>> fields(J);
    for (std::size_t j = 0; j < J; ++j) {
        bool used = false;
        for (std::size_t s = 1; s <= columns.num_operators(); ++s) used = used || columns.position(s, j).has_value();
        if (used) fields[j] = eval_trial(columns.trials()[j], data);
    }
    const std::size_t n = data.state_dim;
    std::vector<std::vector<double>> state(n, std::vector<double>(data.num_points()));
    for (std::size_t p = 0; p < data.num_points(); ++p)
        for (std::size_t c = 0; c < n; ++c) state[c][p] = data.values[p * n + c];

    const std::size_t K = queries.points.size();
    WeakSystem sys;
    sys.G.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(columns.size()));
    sys.b.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(n));

    unsigned T = threads ? threads : std::max(1u, std::thread::hardware_concurrency());

    if (is_tensor_lattice(queries, D)) {
        for (std::size_t c = 0; c < n; ++c) {
            SeparableField sf(state[c], grid.counts, queries, T);
            const auto& v = sf.apply(stencils[0]);
            for (std::size_t k = 0; k < K; ++k)
                sys.b(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = v[k];
        }
        for (std::size_t j = 0; j < J; ++j) {
            if (fields[j].empty()) continue;
            SeparableField sf(fields[j], grid.counts, queries, T);
            for (std::size_t s = 1; s <= columns.num_operators(); ++s)
                if (auto col = columns.position(s, j)) {
                    const auto& v = sf.apply(stencils[s]);
                    for (std::size_t k = 0; k < K; ++k)
                        sys.G(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(*col)) = v[k];
                }
        }
    } else {
        // Convolution: sum over stencil offsets o of W(o) * F(k - o).
        auto row = [&](std::size_t k, std::vector<double>& buf) {
            std::size_t lin = 0;
            for (std::size_t q = 0; q < D; ++q) lin += queries.points[k][q] * strides[q];
            auto gather = [&](const std::vector<double>& f) {
                for (std::size_t i = 0; i < m; ++i)
                    buf[i] = f[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(lin) - offset[i])];
            };
            const auto r = static_cast<Eigen::Index>(k);
            for (std::size_t c = 0; c < n; ++c) {
                gather(state[c]);
                sys.b(r, static_cast<Eigen::Index>(c)) = pairwise_dot(stencils[0].weights.data(), buf.data(), m);
            }
            for (std::size_t j = 0; j < J; ++j) {
                if (fields[j].empty()) continue;
                gather(fields[j]);
                for (std::size_t s = 1; s <= columns.num_operators(); ++s)
                    if (auto col = columns.position(s, j))
                        sys.G(r, static_cast<Eigen::Index>(*col)) =
                            pairwise_dot(stencils[s].weights.data(), buf.data(), m);
            }
        };

        parallel_for(K, T, [&](std::size_t k) {
            thread_local std::vector<double> buf;
            buf.resize(m);
            row(k, buf);
        });
    }

    sys.query_points = queries.points;
    sys.query_per_axis = queries.per_axis;
    sys.columns = std::move(columns);
    sys.radii = radii;
    sys.grid = grid;
    return sys;
}

void write_system_csv(const WeakSystem& system, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.precision(17);
    for (std::size_t c = 0; c < system.columns.size(); ++c)
        out << (c ? "," : "") << '"' << system.columns[c].label() << '"';
    for (Eigen::Index c = 0; c < system.b.cols(); ++c) out << ",b" << (c + 1);
    out << '\n';
    for (Eigen::Index k = 0; k < system.G.rows(); ++k) {
        for (Eigen::Index c = 0; c < system.G.cols(); ++c) out << (c ? "," : "") << system.G(k, c);
        for (Eigen::Index c = 0; c < system.b.cols(); ++c) out << ',' << system.b(k, c);
        out << '\n';
    }
}

}  // namespace wsindy
