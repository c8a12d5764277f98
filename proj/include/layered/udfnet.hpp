// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "layered/geometry.hpp"

namespace layered {

/// Coordinate MLP mapping a positionally encoded point to an unsigned
/// distance. Hidden layers use ReLU, the output layer is linear.
struct MlpUdf {
    int pe_count = 4;
    std::vector<int> widths;  // input = 3 + 6 * pe_count, ..., 1
    std::vector<Eigen::MatrixXd> weights;  // weights[l] is widths[l+1] x widths[l]
    std::vector<Eigen::VectorXd> biases;
    double delta = 0.01;  // loss clamp, meters

    /// Uniform init in +-sqrt(1 / fan_in) for hidden weights and biases; the
    /// output layer starts at zero so the clamped loss has gradient.
    static MlpUdf create(int pe_count, std::span<const int> hidden, double delta, std::uint64_t seed);
    static MlpUdf create(int pe_count = 4, double delta = 0.01, std::uint64_t seed = 1);

    std::size_t layer_count() const { return weights.size(); }
    std::size_t parameter_count() const;
    /// Throws InvalidInput when shapes disagree with `widths`.
    void validate() const;
};

/// [x, sin(2^0 x), cos(2^0 x), ..., sin(2^(N-1) x), cos(2^(N-1) x)], each
/// term componentwise.
Eigen::VectorXd positional_encode(const Vec3& x, int n);

/// Raw network output (can be negative).
double udf_raw(const MlpUdf& model, const Vec3& x);
/// max(raw, 0).
double udf_eval(const MlpUdf& model, const Vec3& x);
/// udf_eval over many points; equal to the pointwise calls bit for bit.
std::vector<double> udf_eval_batch(const MlpUdf& model, std::span<const Vec3> points);

enum class SampleCategory : std::uint8_t { Surface, Near, Box };

struct SampleSet {
    std::vector<Vec3> points;
    std::vector<double> gt;
    std::vector<SampleCategory> category;

    std::size_t size() const { return points.size(); }
};

struct SampleCounts {
    std::size_t surface = 200000, near = 200000, box = 100000;
};

/// Three-category sampler. Surface points are area-uniform on faces whose
/// three vertices are in S; near points add N(0, sigma^2 I) to fresh surface
/// points; box points are uniform in the bounds inflated by 10%. Near and box
/// candidates are kept only when their closest point on the mesh lies on an
/// S face, with gt = that distance; each category gives up after 100x its
/// count in candidates (SamplingStarvation). Empty S is InvalidInput.
SampleSet sample_training_points(const TriMesh& mesh, std::span<const std::uint32_t> garment_set,
                                 const SampleCounts& counts, double sigma, std::uint64_t seed);

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static Gradients zeros_like(const MlpUdf& model);
};

/// mean_i (min(raw_i, delta) - min(gt_i, delta))^2 and, when `grads` is
/// given, its exact gradient. The clamp passes no gradient where raw >= delta.
/// Empty batch is InvalidInput.
double udf_loss(const MlpUdf& model, std::span<const Vec3> points, std::span<const double> gt,
                Gradients* grads = nullptr);

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, adam_epsilon = 1e-8;
    std::size_t batch_size = 4096;
    std::size_t iterations = 20000;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Adam over seeded, epoch-shuffled mini-batches. Returns the loss of every
/// step. A non-finite loss raises Divergence naming the step.
std::vector<double> train_udf(MlpUdf& model, const SampleSet& samples, const TrainConfig& config);

/// Mean |min(f, delta) - min(gt, delta)| over the samples; the network is
/// only asked to be right below the clamp.
double clamped_mean_abs_error(const MlpUdf& model, const SampleSet& samples);

// Checkpoint: "LUDF", u32 version, u32 N, u32 width count, u32 widths...,
// f64 delta, then per layer the row-major float32 weights and biases.
void save_checkpoint(const std::filesystem::path& path, const MlpUdf& model);
MlpUdf load_checkpoint(const std::filesystem::path& path);
/// CSV with header "step,loss".
void save_loss_history(const std::filesystem::path& path, std::span<const double> losses);

}  // namespace layered
