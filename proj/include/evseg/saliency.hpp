// Copyright The evseg Authors
// SPDX-License-Identifier: Apache-2.0

/// @file evseg/saliency.hpp
/// @brief Patch similarity graph and Normalized-Cut foreground bipartition.

#pragma once

#include "evseg/features.hpp"
#include "evseg/grid.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace evseg {

struct SimilarityMatrix {
    Eigen::MatrixXd values;
    /// Patches whose feature vector is all zeros; their row/column is 0.
    std::vector<int> zero_patches;
};

/// Pairwise cosine similarity between the patch vectors of `feats`.
[[nodiscard]] SimilarityMatrix cosine_similarity_matrix(
    PatchFeatureGrid const &feats);

inline constexpr double kDefaultGraphTau = 0.2;
inline constexpr double kDefaultGraphEpsilon = 1e-5;

struct SimilarityGraph {
    Eigen::MatrixXd weights; ///< entries are 1 or epsilon, diagonal 1
    double tau = kDefaultGraphTau;
    double epsilon = kDefaultGraphEpsilon;

    [[nodiscard]] int size() const noexcept {
        return static_cast<int>(weights.rows());
    }
};

/// Edge is 1 where (W_img + W_flow) / 2 >= tau, epsilon otherwise.
[[nodiscard]] SimilarityGraph build_graph(Eigen::MatrixXd const &w_img,
                                          Eigen::MatrixXd const &w_flow,
                                          double tau = kDefaultGraphTau,
                                          double epsilon = kDefaultGraphEpsilon);

/// Image-only graph: the flow similarity is taken to be identically 1.
[[nodiscard]] SimilarityGraph build_graph(Eigen::MatrixXd const &w_img,
                                          double tau = kDefaultGraphTau,
                                          double epsilon = kDefaultGraphEpsilon);

enum class EigenSolverKind { automatic, dense, lanczos };

struct NCutOptions {
    EigenSolverKind solver = EigenSolverKind::automatic;
    /// Largest K handled by the dense solver under `automatic`.
    int dense_max = 512;
    double tolerance = 1e-9;
    int max_restarts = 50;
    int krylov_dim = 60;
    std::uint64_t seed = 1;
};

struct NCutResult {
    Eigen::VectorXd fiedler;
    double lambda2 = 0.0;
    std::vector<std::uint8_t> partition;  ///< fiedler >= mean(fiedler)
    std::vector<std::uint8_t> foreground; ///< the chosen salient side
    double residual = 0.0; ///< ||(D - W)x - lambda D x|| / ||x||
    int iterations = 0;    ///< Lanczos steps (0 for dense)
    bool cues_disagreed = false; ///< max-|x| cue overruled by degree cue
};

/// Second-smallest generalised eigenpair of (D - W) x = lambda D x, threshold
/// at the mean, and pick the foreground side.
///
/// The foreground is the side with the smaller total degree, i.e. the one
/// less connected to the graph. When both sides carry the same total degree
/// the side containing argmax |x| wins (lowest index on ties).
///
/// Throws DegenerateGraphError when K > 2 and all off-diagonal weights are equal, and
/// ConvergenceError when the Lanczos path fails to converge.
[[nodiscard]] NCutResult ncut_bipartition(SimilarityGraph const &graph,
                                          NCutOptions const &opt = {});

/// cut(A, B) / assoc(A, V) + cut(A, B) / assoc(B, V). Infinite if a side is
/// empty.
[[nodiscard]] double ncut_cost(Eigen::MatrixXd const &weights,
                               std::vector<std::uint8_t> const &side);

/// Paint each set patch of a rows x cols patch grid onto a height x width
/// mask. Pixels right/below the last full patch copy the nearest patch.
[[nodiscard]] BinaryMask upsample_patch_mask(
    std::vector<std::uint8_t> const &patches, int rows, int cols,
    int patch_size, int height, int width);

[[nodiscard]] BinaryMask mask_from_partition(NCutResult const &res,
                                             int patch_size, int height,
                                             int width);

} // namespace evseg
