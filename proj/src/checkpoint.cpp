#include "i2v/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "i2v/error.hpp"

namespace i2v::model {

namespace {

constexpr char kMagic[8] = {'I', '2', 'V', 'C', 'K', 'P', 'T', '\0'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
    template <typename U>
    void pod(U v) {
        bytes(&v, sizeof v);
    }
    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
    void bytes(void* p, std::size_t n) {
        if (n > in_.size() - pos_) throw Error("corrupt checkpoint");
        std::memcpy(p, in_.data() + pos_, n);
        pos_ += n;
    }
    template <typename U>
    U pod() {
        U v;
        bytes(&v, sizeof v);
        return v;
    }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n) {
    uLong c = crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        c = crc32(c, p, chunk);
        p += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(c);
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> model_tensors(const Model<T>& m) {
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    for (const auto* ps : m.generator.param_sets())
        for (const auto& p : ps->all()) out.emplace_back(p.name, &p.value);
    for (const auto* d : {&m.discriminators.global, &m.discriminators.local})
        for (const auto& p : d->params().all()) out.emplace_back(p.name, &p.value);
    return out;
}

}  // namespace

template <typename T>
StoredTensor StoredTensor::from(std::string name, const Tensor<T>& t) {
    StoredTensor s;
    s.name = std::move(name);
    s.shape = t.shape();
    s.is_double = std::is_same_v<T, double>;
    s.bytes.resize(t.size() * sizeof(T));
    std::memcpy(s.bytes.data(), t.data(), s.bytes.size());
    return s;
}

template <typename T>
Tensor<T> StoredTensor::as() const {
    Tensor<T> out(shape);
    if (is_double) {
        std::vector<double> v(out.size());
        std::memcpy(v.data(), bytes.data(), bytes.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i]);
    } else {
        std::vector<float> v(out.size());
        std::memcpy(v.data(), bytes.data(), bytes.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i]);
    }
    return out;
}

const StoredTensor* CheckpointFile::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

void write_checkpoint(const CheckpointFile& file, const std::filesystem::path& path) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.pod<std::uint32_t>(kCheckpointVersion);
    const std::string header = file.header.dump();
    w.pod<std::uint64_t>(header.size());
    w.bytes(header.data(), header.size());
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(file.tensors.size()));
    for (const auto& t : file.tensors) {
        w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
        w.bytes(t.name.data(), t.name.size());
        w.pod<std::uint8_t>(t.is_double ? 2 : 1);
        w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) w.pod<std::uint32_t>(static_cast<std::uint32_t>(d));
        w.bytes(t.bytes.data(), t.bytes.size());
    }
    w.pod<std::uint32_t>(crc_of(w.out.data(), w.out.size()));

    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write checkpoint " + path.string());
        out.write(reinterpret_cast<const char*>(w.out.data()), static_cast<std::streamsize>(w.out.size()));
        out.flush();
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw Error("failed writing checkpoint " + path.string() + " (disk full?)");
        }
    }
    std::filesystem::rename(tmp, path);
}

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("checkpoint not found: " + path.string());
    const std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < sizeof kMagic + 4 + 8 + 4 + 4 || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
        throw Error("corrupt checkpoint");
    Reader r(data);
    char magic[8];
    r.bytes(magic, 8);
    if (r.pod<std::uint32_t>() != kCheckpointVersion) throw Error("checkpoint version mismatch");
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, data.data() + data.size() - 4, 4);
    if (crc_of(data.data(), data.size() - 4) != stored_crc) throw Error("corrupt checkpoint");

    CheckpointFile file;
    const auto header_len = r.pod<std::uint64_t>();
    if (header_len > r.remaining()) throw Error("corrupt checkpoint");
    std::string header(header_len, '\0');
    r.bytes(header.data(), header_len);
    try {
        file.header = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception&) {
        throw Error("corrupt checkpoint");
    }
    const auto count = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        StoredTensor t;
        t.name.resize(r.pod<std::uint32_t>());
        r.bytes(t.name.data(), t.name.size());
        const auto dtype = r.pod<std::uint8_t>();
        if (dtype != 1 && dtype != 2) throw Error("corrupt checkpoint");
        t.is_double = dtype == 2;
        const auto rank = r.pod<std::uint32_t>();
        if (rank > 8) throw Error("corrupt checkpoint");
        std::size_t n = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            t.shape.push_back(static_cast<int>(r.pod<std::uint32_t>()));
            n *= static_cast<std::size_t>(t.shape.back());
        }
        const std::size_t nbytes = n * (t.is_double ? 8 : 4);
        if (nbytes > r.remaining()) throw Error("corrupt checkpoint");
        t.bytes.resize(nbytes);
        r.bytes(t.bytes.data(), nbytes);
        file.tensors.push_back(std::move(t));
    }
    if (r.remaining() != 4) throw Error("corrupt checkpoint");
    return file;
}

template <>
const char* dtype_name<float>() {
    return "f32";
}
template <>
const char* dtype_name<double>() {
    return "f64";
}

ArchConfig checkpoint_arch(const CheckpointFile& file) {
    if (!file.header.contains("arch")) throw Error("corrupt checkpoint");
    return ArchConfig::from_json(file.header["arch"].dump());
}

template <typename T>
CheckpointFile model_checkpoint(const Model<T>& model) {
    CheckpointFile f;
    f.header["arch"] = nlohmann::json::parse(model.arch.to_json());
    f.header["dtype"] = dtype_name<T>();
    for (const auto& [name, t] : model_tensors(model)) f.tensors.push_back(StoredTensor::from(name, *t));
    return f;
}

template <typename T>
void restore_model(Model<T>& model, const CheckpointFile& file) {
    if (!(checkpoint_arch(file) == model.arch)) throw Error("architecture mismatch");
    for (const auto& [name, t] : model_tensors(model)) {
        const StoredTensor* s = file.find(name);
        if (!s || s->shape != t->shape()) throw Error("architecture mismatch");
        const_cast<Tensor<T>&>(*t) = s->as<T>();
    }
}

template <typename T>
void save_params(const Model<T>& model, const std::filesystem::path& path) {
    write_checkpoint(model_checkpoint(model), path);
}

template <typename T>
void load_params(Model<T>& model, const std::filesystem::path& path) {
    restore_model(model, read_checkpoint(path));
}

template <typename T>
Model<T> load_model(const std::filesystem::path& path) {
    const CheckpointFile f = read_checkpoint(path);
    Model<T> m(checkpoint_arch(f));
    restore_model(m, f);
    return m;
}

#define I2V_INSTANTIATE(T)                                                         \
    template StoredTensor StoredTensor::from<T>(std::string, const Tensor<T>&);   \
    template Tensor<T> StoredTensor::as<T>() const;                                \
    template CheckpointFile model_checkpoint(const Model<T>&);                     \
    template void restore_model(Model<T>&, const CheckpointFile&);                 \
    template void save_params(const Model<T>&, const std::filesystem::path&);      \
    template void load_params(Model<T>&, const std::filesystem::path&);            \
    template Model<T> load_model<T>(const std::filesystem::path&);

I2V_INSTANTIATE(float)
I2V_INSTANTIATE(double)

#undef I2V_INSTANTIATE

}  // namespace i2v::model
