#include "nucsel/features.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

namespace nucsel {

static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");

FeatureVector extract_builtin(const ImageView& block) {
    if (block.empty()) throw Error("extract_builtin: empty pixel block");
    const int w = block.width;
    const int h = block.height;
    const double n = static_cast<double>(w) * h;

    Eigen::Matrix<double, 3, 8> color = Eigen::Matrix<double, 3, 8>::Zero();
    // Exact integer moments, so a constant block has exactly zero deviation.
    std::array<std::uint64_t, 3> sum{}, sum_sq{};
    Eigen::MatrixXd luma(h, w);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::uint8_t* p = block.pixel(x, y);
            for (int c = 0; c < 3; ++c) {
                color(c, p[c] >> 5) += 1.0;
                sum[c] += p[c];
                sum_sq[c] += static_cast<std::uint64_t>(p[c]) * p[c];
            }
            luma(y, x) = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        }
    }

    Eigen::Matrix<double, 8, 1> orient = Eigen::Matrix<double, 8, 1>::Zero();
    constexpr double kBinWidth = std::numbers::pi / 8.0;
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(y - 1, 0), y1 = std::min(y + 1, h - 1);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(x - 1, 0), x1 = std::min(x + 1, w - 1);
            const double gx = (luma(y, x1) - luma(y, x0)) * 0.5;
            const double gy = (luma(y1, x) - luma(y0, x)) * 0.5;
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) continue;
            double angle = std::atan2(gy, gx);
            if (angle < 0) angle += std::numbers::pi;
            const int bin = std::min(7, static_cast<int>(angle / kBinWidth));
            orient(bin) += mag;
        }
    }

    FeatureVector f(kBuiltinDim);
    for (int c = 0; c < 3; ++c) {
        for (int b = 0; b < 8; ++b) f(c * 8 + b) = static_cast<float>(color(c, b) / n);
    }
    const double orient_total = orient.sum();
    for (int b = 0; b < 8; ++b) f(24 + b) = orient_total > 0 ? static_cast<float>(orient(b) / orient_total) : 0.0f;
    for (int c = 0; c < 3; ++c) {
        const auto count = static_cast<unsigned __int128>(w) * static_cast<unsigned>(h);
        const unsigned __int128 spread = count * sum_sq[c] - static_cast<unsigned __int128>(sum[c]) * sum[c];
        f(32 + c) = static_cast<float>(static_cast<double>(sum[c]) / (n * 255.0));
        f(35 + c) = static_cast<float>(std::sqrt(static_cast<double>(spread)) / (n * 255.0));
    }
    return f;
}

FeatureStore::FeatureStore(int dim) : dim_(dim) {
    if (dim <= 0) throw Error("feature dimension must be positive");
}

void FeatureStore::add(const std::string& key, const Eigen::Ref<const FeatureVector>& v) {
    if (v.size() != dim_) {
        throw Error("feature '" + key + "' has dim " + std::to_string(v.size()) + ", store dim is " +
                    std::to_string(dim_));
    }
    if (!v.allFinite()) throw Error("feature '" + key + "' has non-finite values");
    if (!index_.emplace(key, keys_.size()).second) throw Error("duplicate feature key '" + key + "'");
    keys_.push_back(key);
    data_.insert(data_.end(), v.data(), v.data() + dim_);
}

FeatureStore::ConstRow FeatureStore::at(const std::string& key) const {
    const auto it = index_.find(key);
    if (it == index_.end()) throw Error("missing feature for key '" + key + "'");
    return row(it->second);
}

Eigen::MatrixXd FeatureStore::gather(std::span<const std::string> keys) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(keys.size()), dim_);
    for (std::size_t i = 0; i < keys.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = at(keys[i]).cast<double>();
    return out;
}

void FeatureStore::l2_normalize() {
    for (std::size_t i = 0; i < keys_.size(); ++i) {
        Eigen::Map<FeatureVector> r(data_.data() + i * dim_, dim_);
        const float norm = r.norm();
        if (norm > 0) r /= norm;
    }
}

FeatureStore build_builtin_store(std::span<const ImageRecord> images, std::span<const PatchRef> patches) {
    std::vector<std::array<FeatureVector, 5>> rows(patches.size());
    parallel_for(patches.size(), [&](std::size_t i) {
        const PatchRef& p = patches[i];
        const ImageRecord& img = find_image(images, p.image_id);
        rows[i][0] = extract_builtin(img.view(p.x, p.y, p.s, p.s));
        const auto quads = crop2(p);
        for (std::size_t q = 0; q < 4; ++q) {
            rows[i][q + 1] = extract_builtin(img.view(quads[q].x(), quads[q].y(), quads[q].side(), quads[q].side()));
        }
    });

    FeatureStore store(kBuiltinDim);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        store.add(feature_key(patches[i]), rows[i][0]);
        const auto quads = crop2(patches[i]);
        for (std::size_t q = 0; q < 4; ++q) store.add(feature_key(quads[q]), rows[i][q + 1]);
    }
    return store;
}

void require_keys(const FeatureStore& store, std::span<const PatchRef> patches) {
    for (const auto& p : patches) {
        if (!store.contains(feature_key(p))) throw Error("feature store is missing key '" + feature_key(p) + "'");
        for (const auto& q : crop2(p)) {
            if (!store.contains(feature_key(q))) {
                throw Error("feature store is missing key '" + feature_key(q) + "'");
            }
        }
    }
}

namespace {

template <typename T>
void write_le(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error(std::string("feature file truncated in ") + what);
    return v;
}

}  // namespace

void export_features(const FeatureStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write("FPB1", 4);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
    write_le<std::uint64_t>(out, store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        out.write(reinterpret_cast<const char*>(store.row(i).data()),
                  static_cast<std::streamsize>(sizeof(float) * store.dim()));
    }
    const std::string index = nlohmann::json(store.keys()).dump();
    write_le<std::uint64_t>(out, index.size());
    out.write(index.data(), static_cast<std::streamsize>(index.size()));
    if (!out) throw Error("failed writing " + path.string());
}

FeatureStore import_features(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open feature file " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "FPB1", 4) != 0) throw Error("bad feature file magic in " + path.string());

    const auto dim = read_le<std::uint32_t>(in, "header");
    const auto count = read_le<std::uint64_t>(in, "header");
    if (dim == 0) throw Error("feature file declares dim 0");

    std::vector<float> values(static_cast<std::size_t>(dim));
    std::vector<std::vector<float>> rows;
    rows.reserve(count);
    for (std::uint64_t r = 0; r < count; ++r) {
        if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(sizeof(float) * dim))) {
            throw Error("feature file truncated at row " + std::to_string(r));
        }
        for (float v : values) {
            if (!std::isfinite(v)) throw Error("non-finite feature value at row " + std::to_string(r));
        }
        rows.push_back(values);
    }

    const auto index_len = read_le<std::uint64_t>(in, "index length");
    std::string index(index_len, '\0');
    if (!in.read(index.data(), static_cast<std::streamsize>(index_len))) throw Error("feature file index truncated");
    std::vector<std::string> keys;
    try {
        keys = nlohmann::json::parse(index).get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed feature file index: ") + e.what());
    }
    if (keys.size() != count) {
        throw Error("feature file index has " + std::to_string(keys.size()) + " keys but " + std::to_string(count) +
                    " rows; first unmatched row " + std::to_string(std::min<std::uint64_t>(keys.size(), count)));
    }

    FeatureStore store(static_cast<int>(dim));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        store.add(keys[r], Eigen::Map<const FeatureVector>(rows[r].data(), dim));
    }
    return store;
}

}  // namespace nucsel
