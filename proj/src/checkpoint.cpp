#include "impactrank/error.hpp"
#include "impactrank/training.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace impactrank {

namespace {

constexpr std::string_view kMagic{"IRKCKPT\0", 8};
constexpr std::string_view kEndMarker{"END\0", 4};

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    template <typename T>
    void uint(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::string_view b) { out_.append(b); }
    void str(std::string_view s) {
        uint(static_cast<std::uint32_t>(s.size()));
        bytes(s);
    }
    const std::string& data() const { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    template <typename T>
    T uint() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return v;
    }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto b = in_.substr(pos_, n);
        pos_ += n;
        return b;
    }
    std::string str() { return std::string(bytes(uint<std::uint32_t>())); }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw DataError("corrupt checkpoint: truncated");
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const AttentionModel& model) {
    model.validate();
    Writer w;
    w.bytes(kMagic);
    w.uint(kCheckpointVersion);
    w.uint(static_cast<std::uint32_t>(model.config.input_dim));
    w.uint(static_cast<std::uint32_t>(model.config.hidden_dim));
    w.uint(static_cast<std::uint32_t>(model.config.head_count));
    w.uint(static_cast<std::uint8_t>(model.config.scale_mode));
    w.uint(static_cast<std::uint8_t>(model.config.combine_mode));
    w.uint(static_cast<std::uint16_t>(0));
    w.f64(model.config.pagerank_weight);

    std::uint32_t count = 0;
    AttentionModel::for_each_parameter(model, [&](const std::string&, const Eigen::MatrixXd&) { ++count; });
    w.uint(count);
    AttentionModel::for_each_parameter(model, [&](const std::string& name, const Eigen::MatrixXd& m) {
        w.str(name);
        w.uint(static_cast<std::uint32_t>(m.rows()));
        w.uint(static_cast<std::uint32_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
    });

    w.uint(static_cast<std::uint8_t>(model.scaler.fitted));
    w.uint(static_cast<std::uint32_t>(kFeatureDim));
    for (double v : model.scaler.mean) w.f64(v);
    for (double v : model.scaler.std) w.f64(v);

    w.bytes(kEndMarker);
    w.uint(fnv1a(w.data()));
    return w.data();
}

AttentionModel deserialize_model(std::string_view bytes) {
    Reader r(bytes);
    if (bytes.size() < kMagic.size() || r.bytes(kMagic.size()) != kMagic)
        throw DataError("corrupt checkpoint: bad magic");
    const auto version = r.uint<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw DataError("checkpoint version mismatch: file has " + std::to_string(version) + ", expected " +
                        std::to_string(kCheckpointVersion));

    AttentionConfig config;
    config.input_dim = r.uint<std::uint32_t>();
    config.hidden_dim = r.uint<std::uint32_t>();
    config.head_count = r.uint<std::uint32_t>();
    const auto scale = r.uint<std::uint8_t>();
    const auto combine = r.uint<std::uint8_t>();
    r.uint<std::uint16_t>();
    config.pagerank_weight = r.f64();
    if (scale > 1 || combine > 2) throw DataError("corrupt checkpoint: bad mode field");
    config.scale_mode = static_cast<ScaleMode>(scale);
    config.combine_mode = static_cast<CombineMode>(combine);
    if (config.input_dim != kFeatureDim)
        throw DataError("checkpoint shape mismatch: input_dim " + std::to_string(config.input_dim));
    try {
        config.validate();
    } catch (const UsageError& e) {
        throw DataError(std::string("checkpoint shape mismatch: ") + e.what());
    }

    AttentionModel model = AttentionModel::zeros(config);
    std::vector<std::pair<std::string, Eigen::MatrixXd*>> slots;
    AttentionModel::for_each_parameter(model, [&](const std::string& name, Eigen::MatrixXd& m) {
        slots.emplace_back(name, &m);
    });
    const auto count = r.uint<std::uint32_t>();
    if (count != slots.size())
        throw DataError("checkpoint shape mismatch: " + std::to_string(count) + " matrices, expected " +
                        std::to_string(slots.size()));
    for (auto& [expected_name, m] : slots) {
        const std::string name = r.str();
        if (name != expected_name)
            throw DataError("checkpoint shape mismatch: found " + name + ", expected " + expected_name);
        const auto rows = r.uint<std::uint32_t>();
        const auto cols = r.uint<std::uint32_t>();
        if (rows != m->rows() || cols != m->cols())
            throw DataError("checkpoint shape mismatch for " + name);
        for (Eigen::Index i = 0; i < m->rows(); ++i)
            for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = r.f64();
    }

    model.scaler.fitted = r.uint<std::uint8_t>() != 0;
    if (r.uint<std::uint32_t>() != kFeatureDim) throw DataError("checkpoint shape mismatch: scaler dimension");
    for (double& v : model.scaler.mean) v = r.f64();
    for (double& v : model.scaler.std) v = r.f64();

    if (r.bytes(kEndMarker.size()) != kEndMarker) throw DataError("corrupt checkpoint: missing end marker");
    const std::size_t payload = r.pos();
    const auto checksum = r.uint<std::uint64_t>();
    if (checksum != fnv1a(bytes.substr(0, payload))) throw DataError("corrupt checkpoint: checksum mismatch");
    if (r.pos() != bytes.size()) throw DataError("corrupt checkpoint: trailing bytes");

    model.validate();
    return model;
}

void save_model(const AttentionModel& model, const std::filesystem::path& path) {
    const std::string bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
}

AttentionModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

}  // namespace impactrank
