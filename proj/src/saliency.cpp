// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "evseg/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace evseg {

SimilarityMatrix cosine_similarity_matrix(PatchFeatureGrid const &feats) {
    int const k = feats.count();
    int const d = feats.dim();
    Eigen::MatrixXd m(d, k);
    SimilarityMatrix out;
    for (int i = 0; i < k; ++i) {
        auto const p = feats.patch(i);
        double ss = 0.0;
        for (int j = 0; j < d; ++j) {
            if (!std::isfinite(p[j]))
                throw InvalidArgument("non-finite feature in patch " +
                                      std::to_string(i));
            m(j, i) = p[j];
            ss += static_cast<double>(p[j]) * p[j];
        }
        if (ss > 0.0)
            m.col(i) /= std::sqrt(ss);
        else
            out.zero_patches.push_back(i);
    }
    out.values = m.transpose() * m;
    // Exact unit diagonal and symmetry despite rounding in the product.
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < i; ++j) {
            double const s = std::clamp(out.values(i, j), -1.0, 1.0);
            out.values(i, j) = s;
            out.values(j, i) = s;
        }
        out.values(i, i) = 1.0;
    }
    for (int z : out.zero_patches)
        out.values(z, z) = 0.0;
    return out;
}

namespace {

void check_graph_args(double tau, double epsilon) {
    if (!(tau >= -1.0 && tau <= 1.0))
        throw InvalidArgument("tau must lie in [-1, 1]");
    if (!(epsilon > 0.0))
        throw InvalidArgument("epsilon must be positive");
}

SimilarityGraph threshold_average(Eigen::MatrixXd const &avg, double tau,
                                  double epsilon) {
    SimilarityGraph g;
    g.tau = tau;
    g.epsilon = epsilon;
    auto const k = avg.rows();
    g.weights.resize(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = i; j < k; ++j) {
            double const w = (i == j || avg(i, j) >= tau) ? 1.0 : epsilon;
            g.weights(i, j) = w;
            g.weights(j, i) = w;
        }
    }
    return g;
}

} // namespace

SimilarityGraph build_graph(Eigen::MatrixXd const &w_img,
                            Eigen::MatrixXd const &w_flow, double tau,
                            double epsilon) {
    check_graph_args(tau, epsilon);
    if (w_img.rows() != w_img.cols() || w_img.rows() != w_flow.rows() ||
        w_flow.rows() != w_flow.cols())
        throw InvalidArgument("similarity matrices must be square with equal K");
    return threshold_average(0.5 * (w_img + w_flow), tau, epsilon);
}

SimilarityGraph build_graph(Eigen::MatrixXd const &w_img, double tau,
                            double epsilon) {
    check_graph_args(tau, epsilon);
    if (w_img.rows() != w_img.cols())
        throw InvalidArgument("similarity matrix must be square");
    Eigen::MatrixXd avg = 0.5 * (w_img.array() + 1.0).matrix();
    return threshold_average(avg, tau, epsilon);
}

namespace {

bool all_offdiagonal_equal(Eigen::MatrixXd const &w) {
    auto const k = w.rows();
    if (k < 2)
        return true;
    double const ref = w(0, 1);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            if (i != j && w(i, j) != ref)
                return false;
    return true;
}

struct Eigenpair {
    double lambda = 0.0;
    Eigen::VectorXd x;
    int iterations = 0;
};

Eigenpair solve_dense(Eigen::MatrixXd const &w, Eigen::VectorXd const &deg) {
    Eigen::MatrixXd lap = -w;
    lap.diagonal() += deg;
    Eigen::MatrixXd dmat = deg.asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(
        lap, dmat, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (ges.info() != Eigen::Success)
        throw ConvergenceError(0, "dense generalized eigen-solve failed");
    return {ges.eigenvalues()(1), ges.eigenvectors().col(1), 0};
}

double generalized_residual(Eigen::MatrixXd const &w,
                            Eigen::VectorXd const &deg,
                            Eigen::VectorXd const &x, double lambda) {
    Eigen::VectorXd r = deg.cwiseProduct(x) - w * x -
                        lambda * deg.cwiseProduct(x);
    double const nx = x.norm();
    return nx > 0.0 ? r.norm() / nx : std::numeric_limits<double>::infinity();
}

// Works on A = D^-1/2 W D^-1/2, whose top eigenvector D^1/2 1 (eigenvalue 1)
// is deflated; the largest remaining eigenvalue mu gives lambda = 1 - mu.
Eigenpair solve_lanczos(Eigen::MatrixXd const &w, Eigen::VectorXd const &deg,
                        NCutOptions const &opt) {
    auto const k = w.rows();
    Eigen::VectorXd const inv_sqrt = deg.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd const a =
        inv_sqrt.asDiagonal() * w * inv_sqrt.asDiagonal();
    Eigen::VectorXd q0 = deg.cwiseSqrt();
    q0.normalize();

    int const m = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, k - 1));
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::VectorXd start(k);
    for (Eigen::Index i = 0; i < k; ++i)
        start(i) = unif(rng);

    int total_steps = 0;
    Eigenpair best;
    double best_res = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart <= opt.max_restarts; ++restart) {
        Eigen::MatrixXd v(k, m);
        Eigen::VectorXd alpha(m);
        Eigen::VectorXd beta(m);
        Eigen::VectorXd q = start - q0 * q0.dot(start);
        q.normalize();
        int steps = 0;
        for (int j = 0; j < m; ++j) {
            v.col(j) = q;
            Eigen::VectorXd z = a * q;
            alpha(j) = q.dot(z);
            // Full reorthogonalisation, twice, against q0 and the basis.
            for (int pass = 0; pass < 2; ++pass) {
                z -= q0 * q0.dot(z);
                z -= v.leftCols(j + 1) * (v.leftCols(j + 1).transpose() * z);
            }
            ++steps;
            beta(j) = z.norm();
            if (beta(j) < 1e-14 || j + 1 == m)
                break;
            q = z / beta(j);
        }
        total_steps += steps;

        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(steps, steps);
        for (int j = 0; j < steps; ++j) {
            t(j, j) = alpha(j);
            if (j + 1 < steps) {
                t(j, j + 1) = beta(j);
                t(j + 1, j) = beta(j);
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tes(t);
        Eigen::VectorXd y = v.leftCols(steps) * tes.eigenvectors().col(steps - 1);
        y -= q0 * q0.dot(y);
        y.normalize();
        double const mu = y.dot(a * y);

        Eigen::VectorXd x = inv_sqrt.cwiseProduct(y);
        double const lambda = 1.0 - mu;
        double const res = generalized_residual(w, deg, x, lambda);
        if (res < best_res) {
            best_res = res;
            best = {lambda, x, total_steps};
        }
        if (res <= opt.tolerance)
            return best;
        start = y;
    }
    if (best_res <= 1e-6)
        return best;
    throw ConvergenceError(total_steps,
                           "Lanczos did not converge after " +
                               std::to_string(total_steps) +
                               " iterations (residual " +
                               std::to_string(best_res) + ")");
}

} // namespace

NCutResult ncut_bipartition(SimilarityGraph const &graph,
                            NCutOptions const &opt) {
    auto const &w = graph.weights;
    int const k = graph.size();
    if (k < 2 || w.cols() != k)
        throw InvalidArgument("NCut needs a square graph with K >= 2");
    if (k > 2 && all_offdiagonal_equal(w))
        throw DegenerateGraphError(
            "all edge weights are equal; the bipartition is undefined");

    Eigen::VectorXd const deg = w.rowwise().sum();
    if ((deg.array() <= 0.0).any())
        throw InvalidArgument("graph has a node with non-positive degree");

    bool const dense =
        opt.solver == EigenSolverKind::dense ||
        (opt.solver == EigenSolverKind::automatic && k <= opt.dense_max);
    Eigenpair pair = dense ? solve_dense(w, deg) : solve_lanczos(w, deg, opt);

    NCutResult res;
    res.lambda2 = pair.lambda;
    res.iterations = pair.iterations;
    res.fiedler = pair.x;

    // Deterministic sign: the largest-magnitude entry (lowest index on ties)
    // is positive.
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < k; ++i)
        if (std::abs(res.fiedler(i)) > std::abs(res.fiedler(arg)) * (1.0 + 1e-12))
            arg = i;
    if (res.fiedler(arg) < 0.0)
        res.fiedler = -res.fiedler;
    res.residual = generalized_residual(w, deg, res.fiedler, res.lambda2);

    double const mean = res.fiedler.mean();
    res.partition.resize(k);
    double deg_in = 0.0;
    double deg_out = 0.0;
    for (int i = 0; i < k; ++i) {
        res.partition[i] = res.fiedler(i) >= mean ? 1 : 0;
        (res.partition[i] ? deg_in : deg_out) += deg(i);
    }

    // The max-|x| patch sits on the `partition == 1` side after the sign fix.
    std::uint8_t const max_abs_side = res.partition[arg];
    std::uint8_t fg_side = max_abs_side;
    double const total = deg_in + deg_out;
    if (std::abs(deg_in - deg_out) > 1e-12 * total)
        fg_side = deg_in < deg_out ? 1 : 0;
    res.cues_disagreed = fg_side != max_abs_side;

    res.foreground.resize(k);
    for (int i = 0; i < k; ++i)
        res.foreground[i] = res.partition[i] == fg_side ? 1 : 0;
    return res;
}

double ncut_cost(Eigen::MatrixXd const &weights,
                 std::vector<std::uint8_t> const &side) {
    auto const k = weights.rows();
    double cut = 0.0;
    double assoc_a = 0.0;
    double assoc_b = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            double const wij = weights(i, j);
            if (side[i])
                assoc_a += wij;
            else
                assoc_b += wij;
            if (side[i] && !side[j])
                cut += wij;
        }
    }
    if (assoc_a <= 0.0 || assoc_b <= 0.0)
        return std::numeric_limits<double>::infinity();
    return cut / assoc_a + cut / assoc_b;
}

BinaryMask upsample_patch_mask(std::vector<std::uint8_t> const &patches,
                               int rows, int cols, int patch_size, int height,
                               int width) {
    if (static_cast<int>(patches.size()) != rows * cols)
        throw InvalidArgument("patch mask size does not match the grid");
    if (rows <= 0 || cols <= 0)
        return BinaryMask(width, height);
    BinaryMask m(width, height);
    for (int y = 0; y < height; ++y) {
        int const pr = std::min(y / patch_size, rows - 1);
        for (int x = 0; x < width; ++x) {
            int const pc = std::min(x / patch_size, cols - 1);
            m(x, y) = patches[static_cast<std::size_t>(pr) * cols + pc] ? 1 : 0;
        }
    }
    return m;
}

BinaryMask mask_from_partition(NCutResult const &res, int patch_size,
                               int height, int width) {
    auto const dims = patch_grid_dims(height, width, patch_size);
    if (static_cast<int>(res.foreground.size()) != dims.count())
        throw InvalidArgument("NCut result size does not match the patch grid");
    return upsample_patch_mask(res.foreground, dims.rows, dims.cols, patch_size,
                               height, width);
}

} // namespace evseg
