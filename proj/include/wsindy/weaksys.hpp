#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wsindy/core_data.hpp"
#include "wsindy/testfn.hpp"

namespace wsindy {

using MultiIndex = std::vector<int>;

/// A trial function f_j: a monomial prod u_i^{p_i}, or cos / sin of omega . u.
struct TrialFunction {
    enum class Kind { monomial, cosine, sine };
    Kind kind = Kind::monomial;
    std::vector<int> exponents;
    std::vector<double> omega;

    [[nodiscard]] int degree() const noexcept;
    [[nodiscard]] bool is_constant() const noexcept;
    [[nodiscard]] std::string label() const;
    bool operator==(const TrialFunction&) const = default;
};

/// Exponent vectors of total degree <= p over n variables, graded lexicographic.
[[nodiscard]] std::vector<std::vector<int>> graded_monomials(std::size_t n, int max_degree);

struct LibrarySpec {
    std::size_t state_dim = 1;
    int poly_max_degree = 0;
    std::vector<std::vector<double>> trig_frequencies;
    /// operators[0] is the left-hand side; operators[1..S] build the columns.
    std::vector<MultiIndex> operators;
    /// Drop columns that differentiate the constant trial function; they are
    /// identically zero and would make G rank deficient.
    bool drop_constant_derivatives = true;

    [[nodiscard]] std::vector<TrialFunction> trial_functions() const;
    void validate(std::size_t grid_dims) const;
};

struct Column {
    std::size_t s = 1;  ///< operator index, 1-based
    std::size_t j = 0;  ///< trial-function index, 0-based
    MultiIndex alpha;
    TrialFunction trial;

    [[nodiscard]] std::string label() const;
};

/// Column layout ordered by (s - 1) J + j, skipping dropped pairs.
class ColumnIndex {
public:
    ColumnIndex() = default;
    explicit ColumnIndex(const LibrarySpec& spec);

    [[nodiscard]] std::size_t size() const noexcept { return columns_.size(); }
    [[nodiscard]] const Column& operator[](std::size_t c) const { return columns_.at(c); }
    [[nodiscard]] const std::vector<Column>& columns() const noexcept { return columns_; }
    [[nodiscard]] std::size_t num_trials() const noexcept { return trials_.size(); }
    [[nodiscard]] std::size_t num_operators() const noexcept { return num_ops_; }
    [[nodiscard]] const std::vector<TrialFunction>& trials() const noexcept { return trials_; }
    /// Column position of (s, j), or nothing if the pair was dropped.
    [[nodiscard]] std::optional<std::size_t> position(std::size_t s, std::size_t j) const;
    /// Column position of the term (alpha, trial), or nothing.
    [[nodiscard]] std::optional<std::size_t> find(const MultiIndex& alpha, const TrialFunction& trial) const;

private:
    std::vector<Column> columns_;
    std::vector<TrialFunction> trials_;
    std::vector<std::optional<std::size_t>> lookup_;
    std::vector<MultiIndex> operators_;
    std::size_t num_ops_ = 0;
};

struct QueryLattice {
    std::vector<std::vector<std::size_t>> points;
    std::vector<std::size_t> per_axis;
    /// Grid index of each lattice line per axis. When present, `points` is their
    /// tensor product (last axis fastest) and assembly contracts one axis at a time.
    std::vector<std::vector<std::size_t>> axis_positions;
};

/// Equally spaced interior points whose stencil footprint fits in the grid.
/// Per-axis counts are the largest whose product does not exceed requested_k.
[[nodiscard]] QueryLattice choose_query_points(const Grid& grid, const std::vector<int>& radii,
                                               std::size_t requested_k);

/// Pointwise f_j(U) over all grid points.
[[nodiscard]] std::vector<double> eval_trial(const TrialFunction& f, const Dataset& data);

struct WeakSystem {
    Eigen::MatrixXd G;
    Eigen::MatrixXd b;
    std::vector<std::vector<std::size_t>> query_points;
    std::vector<std::size_t> query_per_axis;
    ColumnIndex columns;
    std::vector<int> radii;
    Grid grid;

    [[nodiscard]] std::size_t support_points() const { return support_size(radii); }
};

/// Rows follow queries.points. Lattices with axis_positions use the separable
/// path; bare point lists fall back to dense accumulation over the full stencil.
[[nodiscard]] WeakSystem assemble(const Dataset& data, const LibrarySpec& library, const std::vector<int>& radii,
                                  const QueryLattice& queries, unsigned threads = 0);

/// Writes (G | b) with a header of column labels.
void write_system_csv(const WeakSystem& system, const std::string& path);

/// Sum of x[i] * y[i] by pairwise (tree) reduction.
[[nodiscard]] double pairwise_dot(const double* x, const double* y, std::size_t n) noexcept;

}  // namespace wsindy
