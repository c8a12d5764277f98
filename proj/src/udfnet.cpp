// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/udfnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "layered/error.hpp"
#include "layered/parallel.hpp"
#include "layered/spatial_index.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace layered {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Every forward pass runs on blocks of exactly this many columns (padded
// with zeros), so a point's result never depends on its batch.
constexpr std::size_t kEvalChunk = 64;
// Gradient partials are formed per block and summed in block order, which
// keeps training independent of the thread count.
constexpr std::size_t kLossChunk = 256;

MatrixXd encode_block(const MlpUdf& m, std::span<const Vec3> points, std::size_t begin, std::size_t cols) {
    MatrixXd x = MatrixXd::Zero(m.widths.front(), static_cast<Eigen::Index>(cols));
    const std::size_t end = std::min(points.size(), begin + cols);
    for (std::size_t i = begin; i < end; ++i) x.col(static_cast<Eigen::Index>(i - begin)) = positional_encode(points[i], m.pe_count);
    return x;
}

// acts[0] is the input; acts[l + 1] the output of layer l (ReLU applied on
// hidden layers). The last entry is the raw network output.
void forward(const MlpUdf& m, MatrixXd x, std::vector<MatrixXd>& acts) {
    const std::size_t layers = m.layer_count();
    acts.resize(layers + 1);
    acts[0] = std::move(x);
    for (std::size_t l = 0; l < layers; ++l) {
        acts[l + 1].noalias() = m.weights[l] * acts[l];
        acts[l + 1].colwise() += m.biases[l];
        if (l + 1 < layers) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
    }
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

}  // namespace

MlpUdf MlpUdf::create(int pe_count, std::span<const int> hidden, double delta, std::uint64_t seed) {
    if (pe_count < 0) throw Error(ErrorKind::InvalidInput, "positional encoding count must be non-negative");
    if (!(delta > 0.0)) throw Error(ErrorKind::InvalidInput, "clamp delta must be positive");
    MlpUdf m;
    m.pe_count = pe_count;
    m.delta = delta;
    m.widths.push_back(3 + 6 * pe_count);
    for (int h : hidden) {
        if (h < 1) throw Error(ErrorKind::InvalidInput, "hidden widths must be positive");
        m.widths.push_back(h);
    }
    m.widths.push_back(1);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
        const int in = m.widths[l], out = m.widths[l + 1];
        const double bound = std::sqrt(1.0 / in);
        MatrixXd w(out, in);
        VectorXd b(out);
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) w(r, c) = (2.0 * uniform01(rng) - 1.0) * bound;
        for (int r = 0; r < out; ++r) b(r) = (2.0 * uniform01(rng) - 1.0) * bound;
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    // Start every prediction at 0 < delta. With the output layer drawn like the
    // others the raw outputs sit far above delta, where the clamp passes no
    // gradient at all.
    m.weights.back().setZero();
    m.biases.back().setZero();
    return m;
}

MlpUdf MlpUdf::create(int pe_count, double delta, std::uint64_t seed) {
    static constexpr int kHidden[] = {128, 256, 256, 128};
    return create(pe_count, kHidden, delta, seed);
}

std::size_t MlpUdf::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

void MlpUdf::validate() const {
    if (widths.size() < 2 || widths.front() != 3 + 6 * pe_count || widths.back() != 1) {
        throw Error(ErrorKind::InvalidInput, "network widths do not match the encoding and scalar output");
    }
    if (weights.size() + 1 != widths.size() || biases.size() != weights.size()) {
        throw Error(ErrorKind::InvalidInput, "network layer count does not match its widths");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != widths[l + 1] || weights[l].cols() != widths[l] || biases[l].size() != widths[l + 1]) {
            throw Error(ErrorKind::InvalidInput, "layer " + std::to_string(l) + " has inconsistent shape");
        }
    }
    if (!(delta > 0.0)) throw Error(ErrorKind::InvalidInput, "clamp delta must be positive");
}

VectorXd positional_encode(const Vec3& x, int n) {
    if (n < 0) throw Error(ErrorKind::InvalidInput, "positional encoding count must be non-negative");
    VectorXd out(3 + 6 * n);
    out.head<3>() = x;
    for (int i = 0; i < n; ++i) {
        const double f = std::ldexp(1.0, i);
        for (int a = 0; a < 3; ++a) {
            out(3 + 6 * i + a) = std::sin(f * x[a]);
            out(3 + 6 * i + 3 + a) = std::cos(f * x[a]);
        }
    }
    return out;
}

double udf_raw(const MlpUdf& model, const Vec3& x) {
    std::vector<MatrixXd> acts;
    forward(model, encode_block(model, std::span(&x, 1), 0, kEvalChunk), acts);
    return acts.back()(0, 0);
}

double udf_eval(const MlpUdf& model, const Vec3& x) { return std::max(udf_raw(model, x), 0.0); }

std::vector<double> udf_eval_batch(const MlpUdf& model, std::span<const Vec3> points) {
    std::vector<double> out(points.size());
    const std::size_t blocks = (points.size() + kEvalChunk - 1) / kEvalChunk;
    parallel_for(blocks, [&](std::size_t blk) {
        std::vector<MatrixXd> acts;
        const std::size_t begin = blk * kEvalChunk;
        forward(model, encode_block(model, points, begin, kEvalChunk), acts);
        const std::size_t end = std::min(points.size(), begin + kEvalChunk);
        for (std::size_t i = begin; i < end; ++i) out[i] = std::max(acts.back()(0, static_cast<Eigen::Index>(i - begin)), 0.0);
    });
    return out;
}

// ---------------------------------------------------------------- sampling

SampleSet sample_training_points(const TriMesh& mesh, std::span<const std::uint32_t> garment_set,
                                 const SampleCounts& counts, double sigma, std::uint64_t seed) {
    if (garment_set.empty()) throw Error(ErrorKind::InvalidInput, "garment vertex set is empty");
    if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidInput, "near-surface sigma must be non-negative");
    std::vector<bool> in_s(mesh.vertices.size(), false);
    for (auto v : garment_set) {
        if (v >= mesh.vertices.size()) throw Error(ErrorKind::InvalidInput, "garment vertex out of range");
        in_s[v] = true;
    }
    std::vector<bool> s_face(mesh.faces.size(), false);
    std::vector<std::uint32_t> faces;
    std::vector<double> cumulative;
    double total = 0.0;
    for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        if (!(in_s[t[0]] && in_s[t[1]] && in_s[t[2]])) continue;
        s_face[f] = true;
        const double a = mesh.face_area(f);
        if (!(a > 0.0)) continue;
        total += a;
        faces.push_back(f);
        cumulative.push_back(total);
    }
    if (faces.empty()) throw Error(ErrorKind::InvalidInput, "no face has all three vertices in the garment set");
    const SpatialIndex index(mesh);
    const Aabb box = index.bounds().inflated(0.1);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto surface_point = [&]() {
        const double r = uniform01(rng) * total;
        std::size_t k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
        k = std::min(k, faces.size() - 1);
        const Face& t = mesh.faces[faces[k]];
        const double s = std::sqrt(uniform01(rng)), u = uniform01(rng);
        return Vec3((1.0 - s) * mesh.vertices[t[0]] + s * (1.0 - u) * mesh.vertices[t[1]] + s * u * mesh.vertices[t[2]]);
    };

    SampleSet out;
    for (std::size_t i = 0; i < counts.surface; ++i) {
        out.points.push_back(surface_point());
        out.gt.push_back(0.0);
        out.category.push_back(SampleCategory::Surface);
    }
    auto fill = [&](std::size_t want, SampleCategory cat, auto&& candidate) {
        const std::size_t cap = 100 * want;
        std::size_t drawn = 0, accepted = 0;
        std::vector<Vec3> batch;
        std::vector<ClosestHit> hits;
        while (accepted < want) {
            if (drawn >= cap) {
                throw Error(ErrorKind::SamplingStarvation,
                            std::string(cat == SampleCategory::Near ? "near-surface" : "box") + " sampling kept " +
                                std::to_string(accepted) + " of " + std::to_string(want) + " after " +
                                std::to_string(drawn) + " candidates");
            }
            const std::size_t n = std::min(cap - drawn, std::max<std::size_t>(want - accepted, 1024));
            batch.clear();
            for (std::size_t i = 0; i < n; ++i) batch.push_back(candidate());
            drawn += n;
            hits.resize(n);
            parallel_for(n, [&](std::size_t i) { hits[i] = index.closest_point(batch[i]); });
            for (std::size_t i = 0; i < n && accepted < want; ++i) {
                if (!s_face[hits[i].face]) continue;
                out.points.push_back(batch[i]);
                out.gt.push_back(hits[i].distance);
                out.category.push_back(cat);
                ++accepted;
            }
        }
    };
    fill(counts.near, SampleCategory::Near, [&]() {
        const Vec3 p = surface_point();
        const double dx = gauss(rng), dy = gauss(rng), dz = gauss(rng);
        return Vec3(p + sigma * Vec3(dx, dy, dz));
    });
    fill(counts.box, SampleCategory::Box, [&]() {
        const double x = uniform01(rng), y = uniform01(rng), z = uniform01(rng);
        return Vec3(box.min + Vec3(x, y, z).cwiseProduct(box.max - box.min));
    });
    return out;
}

// ---------------------------------------------------------------- loss

Gradients Gradients::zeros_like(const MlpUdf& model) {
    Gradients g;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        g.weights.push_back(MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
        g.biases.push_back(VectorXd::Zero(model.biases[l].size()));
    }
    return g;
}

double udf_loss(const MlpUdf& model, std::span<const Vec3> points, std::span<const double> gt, Gradients* grads) {
    if (points.empty()) throw Error(ErrorKind::InvalidInput, "loss needs a non-empty batch");
    if (points.size() != gt.size()) throw Error(ErrorKind::InvalidInput, "batch points and targets differ in length");
    const std::size_t n = points.size();
    const std::size_t blocks = (n + kLossChunk - 1) / kLossChunk;
    const std::size_t layers = model.layer_count();
    const double d = model.delta;
    std::vector<double> partial(blocks, 0.0);
    std::vector<Gradients> block_grads(grads ? blocks : 0);
    parallel_for(blocks, [&](std::size_t blk) {
        const std::size_t begin = blk * kLossChunk, end = std::min(n, begin + kLossChunk);
        const std::size_t cols = end - begin;
        std::vector<MatrixXd> acts;
        forward(model, encode_block(model, points, begin, cols), acts);
        MatrixXd g(1, static_cast<Eigen::Index>(cols));
        double sum = 0.0;
        for (std::size_t i = 0; i < cols; ++i) {
            const double raw = acts.back()(0, static_cast<Eigen::Index>(i));
            const double r = std::min(raw, d) - std::min(gt[begin + i], d);
            sum += r * r;
            g(0, static_cast<Eigen::Index>(i)) = raw < d ? 2.0 * r / static_cast<double>(n) : 0.0;
        }
        partial[blk] = sum;
        if (!grads) return;
        Gradients& out = block_grads[blk];
        out.weights.resize(layers);
        out.biases.resize(layers);
        for (std::size_t l = layers; l-- > 0;) {
            out.weights[l].noalias() = g * acts[l].transpose();
            out.biases[l] = g.rowwise().sum();
            if (l == 0) break;
            MatrixXd back = model.weights[l].transpose() * g;
            g = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
        }
    });
    double total = 0.0;
    for (double p : partial) total += p;
    if (grads) {
        *grads = Gradients::zeros_like(model);
        for (const auto& bg : block_grads) {
            for (std::size_t l = 0; l < layers; ++l) {
                grads->weights[l] += bg.weights[l];
                grads->biases[l] += bg.biases[l];
            }
        }
    }
    return total / static_cast<double>(n);
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidInput, "learning rate must be positive");
    if (batch_size < 1) throw Error(ErrorKind::InvalidInput, "batch size must be at least 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_epsilon > 0.0)) {
        throw Error(ErrorKind::InvalidInput, "Adam parameters out of range");
    }
}

std::vector<double> train_udf(MlpUdf& model, const SampleSet& samples, const TrainConfig& config) {
    config.validate();
    model.validate();
    if (samples.size() == 0) throw Error(ErrorKind::InvalidInput, "training needs at least one sample");
    const std::size_t n = samples.size();
    const std::size_t batch = std::min(config.batch_size, n);
    const std::size_t layers = model.layer_count();
    Gradients m1 = Gradients::zeros_like(model), m2 = Gradients::zeros_like(model), g;
    std::mt19937_64 rng(mix(config.seed, 0x7261696eull));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::size_t cursor = n;  // forces a shuffle before the first step
    std::vector<Vec3> pts(batch);
    std::vector<double> gt(batch);
    std::vector<double> history;
    history.reserve(config.iterations);
    double b1t = 1.0, b2t = 1.0;
    for (std::size_t step = 0; step < config.iterations; ++step) {
        if (cursor + batch > n) {
            for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
            cursor = 0;
        }
        for (std::size_t i = 0; i < batch; ++i) {
            pts[i] = samples.points[order[cursor + i]];
            gt[i] = samples.gt[order[cursor + i]];
        }
        cursor += batch;
        const double loss = udf_loss(model, pts, gt, &g);
        if (!std::isfinite(loss)) {
            throw Error(ErrorKind::Divergence, "training loss became non-finite at step " + std::to_string(step));
        }
        history.push_back(loss);
        b1t *= config.beta1;
        b2t *= config.beta2;
        const double c1 = 1.0 / (1.0 - b1t), c2 = 1.0 / (1.0 - b2t);
        auto adam = [&](auto& param, auto& grad, auto& m, auto& v) {
            m = config.beta1 * m + (1.0 - config.beta1) * grad;
            v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseAbs2();
            param.array() -= config.learning_rate * (m.array() * c1) / ((v.array() * c2).sqrt() + config.adam_epsilon);
        };
        for (std::size_t l = 0; l < layers; ++l) {
            adam(model.weights[l], g.weights[l], m1.weights[l], m2.weights[l]);
            adam(model.biases[l], g.biases[l], m1.biases[l], m2.biases[l]);
        }
    }
    return history;
}

double clamped_mean_abs_error(const MlpUdf& model, const SampleSet& samples) {
    if (samples.size() == 0) throw Error(ErrorKind::InvalidInput, "error needs at least one sample");
    const auto f = udf_eval_batch(model, samples.points);
    double sum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) sum += std::abs(std::min(f[i], model.delta) - std::min(samples.gt[i], model.delta));
    return sum / static_cast<double>(f.size());
}

// ---------------------------------------------------------------- files

namespace {

constexpr char kMagic[4] = {'L', 'U', 'D', 'F'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw Error(ErrorKind::Format, path.string() + ": truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const MlpUdf& model) {
    model.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.pe_count));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.widths.size()));
    for (int w : model.widths) put<std::uint32_t>(out, static_cast<std::uint32_t>(w));
    put<double>(out, model.delta);
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const auto& w = model.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) put<float>(out, static_cast<float>(w(r, c)));
        for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) put<float>(out, static_cast<float>(model.biases[l](r)));
    }
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

MlpUdf load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorKind::Format, path.string() + ": not a UDF checkpoint");
    const auto version = get<std::uint32_t>(in, path);
    if (version != kVersion) {
        throw Error(ErrorKind::Format, path.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
    MlpUdf m;
    m.pe_count = static_cast<int>(get<std::uint32_t>(in, path));
    const auto count = get<std::uint32_t>(in, path);
    if (count < 2 || count > 64) throw Error(ErrorKind::Format, path.string() + ": implausible layer count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto w = get<std::uint32_t>(in, path);
        if (w < 1 || w > (1u << 16)) throw Error(ErrorKind::Format, path.string() + ": implausible layer width");
        m.widths.push_back(static_cast<int>(w));
    }
    m.delta = get<double>(in, path);
    for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
        MatrixXd w(m.widths[l + 1], m.widths[l]);
        VectorXd b(m.widths[l + 1]);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = get<float>(in, path);
        for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = get<float>(in, path);
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    try {
        m.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::Format, path.string() + ": " + e.what());
    }
    return m;
}

void save_loss_history(const std::filesystem::path& path, std::span<const double> losses) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << "step,loss\n";
    out.precision(17);
    for (std::size_t i = 0; i < losses.size(); ++i) out << i << ',' << losses[i] << '\n';
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace layered
