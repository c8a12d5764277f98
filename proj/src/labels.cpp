// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/labels.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "layered/error.hpp"
#include "layered/parallel.hpp"

namespace layered {

namespace fs = std::filesystem;

std::vector<int> vote_vertex_labels(const TriMesh& mesh, std::span<const LabeledView> views, const VoteConfig& config) {
    if (views.empty()) throw Error(ErrorKind::InvalidInput, "label voting needs at least one view");
    for (std::size_t v = 0; v < views.size(); ++v) {
        const auto& view = views[v];
        if (view.mask.width != view.camera.width || view.mask.height != view.camera.height) {
            throw Error(ErrorKind::InvalidInput, "mask " + std::to_string(v) + " is " + std::to_string(view.mask.width) +
                                                     "x" + std::to_string(view.mask.height) + " but its camera is " +
                                                     std::to_string(view.camera.width) + "x" +
                                                     std::to_string(view.camera.height));
        }
    }
    const std::size_t n = mesh.vertices.size();
    std::vector<int> visible(n, 0), hits(n, 0);
    for (const auto& view : views) {
        const RenderBuffers buf = render_buffers(mesh, view.camera);
        parallel_for(n, [&](std::size_t i) {
            const auto p = view.camera.project(mesh.vertices[i]);
            if (!p) return;
            const int px = static_cast<int>(std::floor(p->x));
            const int py = static_cast<int>(std::floor(p->y));
            if (px < 0 || py < 0 || px >= buf.width || py >= buf.height) return;
            const double surface = buf.depth[buf.index(px, py)];
            if (!(std::abs(p->depth - surface) <= config.visibility_tolerance)) return;
            ++visible[i];
            if (view.mask.at(px, py)) ++hits[i];
        });
    }
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (visible[i] > 0 && 2 * hits[i] > visible[i]) labels[i] = config.garment_label;
    }
    return labels;
}

std::vector<LabeledView> region_masks(const TriMesh& mesh, std::span<const Camera> cameras,
                                      const std::function<bool(const Vec3&)>& region) {
    std::vector<LabeledView> views;
    views.reserve(cameras.size());
    for (const auto& cam : cameras) {
        const RenderBuffers buf = render_buffers(mesh, cam);
        LabeledView view{cam, LabelMask(cam.width, cam.height)};
        for (int y = 0; y < cam.height; ++y) {
            for (int x = 0; x < cam.width; ++x) {
                const std::size_t i = buf.index(x, y);
                if (buf.face_id[i] == kBackground) continue;
                const auto [origin, dir] = cam.pixel_ray(x + 0.5, y + 0.5);
                // Depth is measured along the view axis, not along the ray.
                const double t = buf.depth[i] / dir.dot(cam.forward());
                view.mask.set(x, y, region(origin + t * dir));
            }
        }
        views.push_back(std::move(view));
    }
    return views;
}

std::vector<int> majority_pass(const std::vector<std::vector<std::uint32_t>>& adjacency, std::span<const int> labels) {
    std::vector<int> out(labels.begin(), labels.end());
    std::vector<std::pair<int, int>> counts;
    for (std::size_t v = 0; v < labels.size(); ++v) {
        counts.clear();
        auto add = [&](int label) {
            for (auto& c : counts) {
                if (c.first == label) {
                    ++c.second;
                    return;
                }
            }
            counts.emplace_back(label, 1);
        };
        add(labels[v]);
        for (auto nb : adjacency[v]) add(labels[nb]);
        int own = 0, best = labels[v], best_count = 0;
        for (const auto& [label, count] : counts) {
            if (label == labels[v]) own = count;
            if (count > best_count || (count == best_count && label < best)) {
                best = label;
                best_count = count;
            }
        }
        // The current label survives any tie.
        out[v] = own == best_count ? labels[v] : best;
    }
    return out;
}

std::vector<int> refine_labels(const TriMesh& mesh, std::span<const int> labels, int smoothing_iters) {
    if (labels.size() != mesh.vertices.size()) {
        throw Error(ErrorKind::InvalidInput, "label count does not match vertex count");
    }
    std::vector<int> out(labels.begin(), labels.end());
    std::map<int, std::vector<std::uint32_t>> by_label;
    for (std::uint32_t v = 0; v < out.size(); ++v) {
        if (out[v] != 0) by_label[out[v]].push_back(v);
    }
    for (const auto& [label, members] : by_label) {
        auto comps = connected_components(mesh, members);
        for (std::size_t c = 1; c < comps.size(); ++c) {
            for (auto v : comps[c]) out[v] = 0;
        }
    }
    const auto adjacency = vertex_adjacency(mesh);
    for (int it = 0; it < smoothing_iters; ++it) out = majority_pass(adjacency, out);
    return out;
}

// ------------------------------------------------------------------ images

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

LabelMask load_png(const fs::path& path) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw Error(ErrorKind::Io, "cannot open " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw Error(ErrorKind::Format, path.string() + ": not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "libpng initialization failed");
    }
    LabelMask mask;
    std::vector<png_byte> data;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Format, path.string() + ": corrupt PNG data");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_packing(png);
    png_read_update_info(png, info);
    const auto w = png_get_image_width(png, info), h = png_get_image_height(png, info);
    const auto channels = png_get_channels(png, info);
    const auto rowbytes = png_get_rowbytes(png, info);
    data.resize(rowbytes * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    mask = LabelMask(static_cast<int>(w), static_cast<int>(h));
    // Alpha is ignored; any nonzero color channel marks the pixel.
    const int color_channels = (channels == 2 || channels == 4) ? channels - 1 : channels;
    for (png_uint_32 y = 0; y < h; ++y) {
        for (png_uint_32 x = 0; x < w; ++x) {
            bool on = false;
            for (int c = 0; c < color_channels; ++c) on = on || rows[y][x * channels + c] != 0;
            mask.set(static_cast<int>(x), static_cast<int>(y), on);
        }
    }
    return mask;
}

LabelMask load_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    auto token = [&]() {
        std::string t;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string skip;
                std::getline(in, skip);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) break;
                continue;
            }
            t.push_back(c);
        }
        return t;
    };
    const std::string magic = token();
    if (magic != "P5" && magic != "P2") throw Error(ErrorKind::Format, path.string() + ": not a PGM file");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw Error(ErrorKind::Format, path.string() + ": bad PGM header");
    }
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw Error(ErrorKind::Format, path.string() + ": bad PGM header");
    LabelMask mask(w, h);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (magic == "P5") {
        const std::size_t bytes = maxval < 256 ? 1 : 2;
        std::vector<unsigned char> raw(n * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!in) throw Error(ErrorKind::Format, path.string() + ": truncated PGM data");
        for (std::size_t i = 0; i < n; ++i) {
            mask.pixels[i] = bytes == 1 ? raw[i] != 0 : (raw[2 * i] != 0 || raw[2 * i + 1] != 0);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const std::string t = token();
            if (t.empty()) throw Error(ErrorKind::Format, path.string() + ": truncated PGM data");
            mask.pixels[i] = std::stoi(t) != 0;
        }
    }
    return mask;
}

std::string lower_ext(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

}  // namespace

void save_gray_png(const fs::path& path, int width, int height, std::span<const std::uint8_t> pixels) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw Error(ErrorKind::Io, "cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Io, "libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Io, "PNG write failed for " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

LabelMask load_mask(const fs::path& path) {
    const auto ext = lower_ext(path);
    if (ext == ".png") return load_png(path);
    if (ext == ".pgm") return load_pgm(path);
    throw Error(ErrorKind::Usage, "unsupported mask extension '" + ext + "' for " + path.string());
}

void save_mask(const fs::path& path, const LabelMask& mask) {
    std::vector<std::uint8_t> gray(mask.pixels.size());
    for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.pixels[i] ? 255 : 0;
    const auto ext = lower_ext(path);
    if (ext == ".png") {
        save_gray_png(path, mask.width, mask.height, gray);
    } else if (ext == ".pgm") {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
        out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
        out.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
        if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
    } else {
        throw Error(ErrorKind::Usage, "unsupported mask extension '" + ext + "' for " + path.string());
    }
}

}  // namespace layered
