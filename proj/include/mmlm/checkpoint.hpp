#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mmlm/adamw.hpp"
#include "mmlm/bytes.hpp"
#include "mmlm/tensor.hpp"

// Checkpoints are a pair of files: <stem>.manifest, a line-oriented text
// index (meta key/value pairs plus one tensor line each with name, dtype,
// shape, byte offset and length), and <stem>.blob holding every tensor's
// little-endian payload back to back. Loading is strict: the tensor set and
// shapes must match the live model exactly.

namespace mmlm {

namespace detail {

template <class T>
const char* dtype_name();
template <>
inline const char* dtype_name<float>() {
    return "f32";
}
template <>
inline const char* dtype_name<double>() {
    return "f64";
}

template <class T>
void append_values(std::string& out, const T* p, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        if constexpr (sizeof(T) == 4)
            bytes::put_f32(out, static_cast<float>(p[i]));
        else
            bytes::put_f64(out, static_cast<double>(p[i]));
    }
}

template <class T>
void read_values(const std::string& blob, size_t offset, T* p, size_t n) {
    const uint8_t* base = reinterpret_cast<const uint8_t*>(blob.data()) + offset;
    for (size_t i = 0; i < n; ++i) {
        if constexpr (sizeof(T) == 4)
            p[i] = static_cast<T>(bytes::get_f32(base + i * 4));
        else
            p[i] = static_cast<T>(bytes::get_f64(base + i * 8));
    }
}

struct ManifestEntry {
    std::string dtype;
    std::vector<size_t> dims;
    size_t offset = 0;
    size_t nbytes = 0;
};

struct Manifest {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, ManifestEntry>> tensors;

    const ManifestEntry* find(const std::string& name) const {
        for (const auto& [n, e] : tensors)
            if (n == name) return &e;
        return nullptr;
    }
};

inline Manifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path);
    Manifest man;
    std::string line;
    if (!std::getline(in, line) || line != "mmckpt 1")
        throw DataError("unrecognized manifest header in " + path);
    size_t lineno = 1;
    while (std::getline(in, line)) {
        lineno++;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            if (key.empty()) throw DataError("bad meta line " + std::to_string(lineno) + " in " + path);
            man.meta[key] = value;
        } else if (kind == "tensor") {
            std::string name;
            ManifestEntry e;
            size_t rank = 0;
            ls >> name >> e.dtype >> rank;
            if (!ls || rank > 8) throw DataError("bad tensor line " + std::to_string(lineno) + " in " + path);
            e.dims.resize(rank);
            for (auto& d : e.dims) ls >> d;
            ls >> e.offset >> e.nbytes;
            if (!ls) throw DataError("bad tensor line " + std::to_string(lineno) + " in " + path);
            man.tensors.emplace_back(std::move(name), std::move(e));
        } else {
            throw DataError("unknown manifest record '" + kind + "' in " + path);
        }
    }
    return man;
}

} // namespace detail

// Collects tensors to be saved or restored as one checkpoint, in a fixed
// order; optimizer moments ride along under reserved "adam." names.
template <class T>
struct CheckpointBundle {
    std::vector<NamedTensor<T>> tensors;
    std::map<std::string, std::string> meta;

    void add(const std::string& name, Tensor<T> t) {
        if (name.empty()) throw DataError("checkpoint tensors need names");
        for (const auto& nt : tensors)
            if (nt.name == name) throw DataError("duplicate checkpoint tensor " + name);
        tensors.push_back({name, t});
    }
};

template <class T>
CheckpointBundle<T> make_bundle(ParamList<T>& params, AdamW<T>* opt,
                                std::map<std::string, std::string> meta = {}) {
    CheckpointBundle<T> b;
    b.meta = std::move(meta);
    for (auto& p : params) b.add(p.name, p.value);
    if (opt) {
        opt->visit_state([&](auto slot) {
            b.add("adam.m." + slot.name, slot.m);
            b.add("adam.v." + slot.name, slot.v);
        });
        b.meta["adam.step"] = std::to_string(opt->step_count());
    }
    return b;
}

template <class T>
void save_checkpoint(const std::string& stem, const CheckpointBundle<T>& bundle) {
    std::string blob;
    std::ostringstream man;
    man << "mmckpt 1\n";
    for (const auto& [k, v] : bundle.meta) man << "meta " << k << " " << v << "\n";
    for (const auto& nt : bundle.tensors) {
        const auto& t = nt.value;
        const size_t offset = blob.size();
        detail::append_values(blob, t.data(), t.size());
        man << "tensor " << nt.name << " " << detail::dtype_name<T>() << " " << t.rank();
        for (size_t d = 0; d < t.rank(); ++d) man << " " << t.dim(d);
        man << " " << offset << " " << (blob.size() - offset) << "\n";
    }
    std::ofstream bf(stem + ".blob", std::ios::binary);
    if (!bf) throw DataError("cannot write " + stem + ".blob");
    bf.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    bf.close();
    if (!bf) throw DataError("failed writing " + stem + ".blob");
    std::ofstream mf(stem + ".manifest", std::ios::binary);
    if (!mf) throw DataError("cannot write " + stem + ".manifest");
    mf << man.str();
    mf.close();
    if (!mf) throw DataError("failed writing " + stem + ".manifest");
}

// Restores every bundle tensor in place and returns the stored meta map.
// Unknown tensors in the file and tensors missing from it are both errors.
template <class T>
std::map<std::string, std::string> load_checkpoint(const std::string& stem,
                                                   CheckpointBundle<T>& bundle) {
    auto man = detail::read_manifest(stem + ".manifest");
    std::ifstream bf(stem + ".blob", std::ios::binary);
    if (!bf) throw DataError("cannot open " + stem + ".blob");
    std::ostringstream ss;
    ss << bf.rdbuf();
    const std::string blob = ss.str();

    if (man.tensors.size() != bundle.tensors.size())
        throw DataError("checkpoint holds " + std::to_string(man.tensors.size()) + " tensors, expected " +
                        std::to_string(bundle.tensors.size()));
    for (auto& nt : bundle.tensors) {
        const auto* e = man.find(nt.name);
        if (!e) throw DataError("checkpoint is missing tensor " + nt.name);
        if (e->dtype != detail::dtype_name<T>())
            throw DataError("tensor " + nt.name + " stored as " + e->dtype + ", expected " +
                            detail::dtype_name<T>());
        auto& t = nt.value;
        if (e->dims.size() != t.rank()) throw DataError("tensor " + nt.name + " rank mismatch");
        for (size_t d = 0; d < t.rank(); ++d)
            if (e->dims[d] != t.dim(d)) throw DataError("tensor " + nt.name + " shape mismatch");
        if (e->nbytes != t.size() * sizeof(T) || e->offset + e->nbytes > blob.size())
            throw DataError("tensor " + nt.name + " payload out of range");
        detail::read_values(blob, e->offset, t.data(), t.size());
    }
    return man.meta;
}

template <class T>
void save_checkpoint(const std::string& stem, ParamList<T>& params, AdamW<T>* opt,
                     std::map<std::string, std::string> meta = {}) {
    auto bundle = make_bundle(params, opt, std::move(meta));
    save_checkpoint(stem, bundle);
}

template <class T>
void save_checkpoint(const std::string& stem, ParamList<T>& params,
                     std::map<std::string, std::string> meta = {}) {
    save_checkpoint(stem, params, static_cast<AdamW<T>*>(nullptr), std::move(meta));
}

template <class T>
std::map<std::string, std::string> load_checkpoint(const std::string& stem, ParamList<T>& params,
                                                   AdamW<T>* opt) {
    auto bundle = make_bundle(params, opt);
    auto meta = load_checkpoint(stem, bundle);
    if (opt) {
        auto it = meta.find("adam.step");
        if (it == meta.end()) throw DataError("checkpoint has no optimizer step count");
        opt->set_step_count(std::stoll(it->second));
    }
    return meta;
}

template <class T>
std::map<std::string, std::string> load_checkpoint(const std::string& stem, ParamList<T>& params) {
    return load_checkpoint(stem, params, static_cast<AdamW<T>*>(nullptr));
}

} // namespace mmlm
