#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "havenet/errors.hpp"
#include "havenet/rng.hpp"
#include "havenet/tensor.hpp"

namespace havenet {

// One labeled example: paired audio/visual feature vectors.
struct PairedSample {
    std::vector<double> audio;
    std::vector<double> visual;
    int label = 0;
};

struct Dataset {
    std::size_t d_audio = 0;
    std::size_t d_visual = 0;
    std::vector<PairedSample> samples;
    std::vector<std::string> class_names;   // index = dense class id
    std::vector<std::vector<std::size_t>> by_class;  // sample indices per class

    std::size_t class_count() const { return class_names.size(); }

    void rebuild_index() {
        by_class.assign(class_names.size(), {});
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const int y = samples[i].label;
            if (y < 0 || std::size_t(y) >= class_names.size())
                throw FormatError("sample " + std::to_string(i) + " label " +
                                      std::to_string(y) + " outside class table",
                                  0);
            by_class[std::size_t(y)].push_back(i);
        }
    }
};

struct SplitSpec {
    std::set<int> base_classes;
    std::set<int> novel_classes;
};

// One K-way m-shot task. Entries pair a dataset sample index with the
// episode-local class slot (0..way-1).
struct Episode {
    std::size_t way = 0;
    std::size_t shot = 0;
    std::size_t query_per_class = 0;
    std::vector<std::pair<std::size_t, std::size_t>> support;  // (index, slot)
    std::vector<std::pair<std::size_t, std::size_t>> query;
    std::vector<int> class_of_slot;
};

struct SynthSpec {
    std::size_t class_count = 13;
    std::size_t latent_dim = 16;
    std::size_t samples_per_class = 200;
    std::size_t d_audio = 1024;
    std::size_t d_visual = 1024;
    double cross_modal_coupling = 0.9;  // rho
    double noise_sigma = 0.01;
    std::uint64_t seed = 0;

    void validate() const {
        if (class_count < 2) throw ConfigError("synth.class_count must be >= 2");
        if (samples_per_class < 2)
            throw ConfigError("synth.samples_per_class must be >= 2");
        if (latent_dim == 0) throw ConfigError("synth.latent_dim must be >= 1");
        if (d_audio == 0 || d_visual == 0)
            throw ConfigError("synth.d_audio/d_visual must be >= 1");
        if (cross_modal_coupling < 0.0 || cross_modal_coupling > 1.0)
            throw ConfigError("synth.cross_modal_coupling must be in [0,1]");
        if (noise_sigma < 0.0) throw ConfigError("synth.noise_sigma must be >= 0");
    }
};

// Shared-latent linear model. Per class a latent centroid; per sample a shared
// latent and one private latent per modality, all centered on the centroid.
// Each modality projects rho*shared + (1-rho)*private through a fixed random
// matrix, plus feature noise. rho=1 couples the modalities through one latent;
// rho=0 makes them class-conditionally independent.
inline Dataset generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    RngStream master(spec.seed);

    const std::size_t L = spec.latent_dim;
    RngStream proj_rng = master.derive("projections");
    Tensor2 proj_a(L, spec.d_audio), proj_v(L, spec.d_visual);
    const double proj_scale = 1.0 / std::sqrt(double(L));
    for (auto& w : proj_a.data) w = proj_rng.normal() * proj_scale;
    for (auto& w : proj_v.data) w = proj_rng.normal() * proj_scale;

    const double kCentroidSpread = 3.0;
    const double rho = spec.cross_modal_coupling;

    Dataset ds;
    ds.d_audio = spec.d_audio;
    ds.d_visual = spec.d_visual;
    for (std::size_t c = 0; c < spec.class_count; ++c)
        ds.class_names.push_back("class_" + std::to_string(c));

    RngStream class_rng = master.derive("classes");
    for (std::size_t c = 0; c < spec.class_count; ++c) {
        RngStream crng = class_rng.derive(std::uint64_t(c));
        std::vector<double> centroid(L);
        for (auto& v : centroid) v = crng.normal() * kCentroidSpread;
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            Tensor2 shared(1, L), priv_a(1, L), priv_v(1, L);
            for (std::size_t j = 0; j < L; ++j) {
                shared.at(0, j) = centroid[j] + crng.normal();
                priv_a.at(0, j) = centroid[j] + crng.normal();
                priv_v.at(0, j) = centroid[j] + crng.normal();
            }
            Tensor2 blend_a(1, L), blend_v(1, L);
            for (std::size_t j = 0; j < L; ++j) {
                blend_a.at(0, j) = rho * shared.at(0, j) + (1.0 - rho) * priv_a.at(0, j);
                blend_v.at(0, j) = rho * shared.at(0, j) + (1.0 - rho) * priv_v.at(0, j);
            }
            Tensor2 audio = matmul(blend_a, proj_a);
            Tensor2 visual = matmul(blend_v, proj_v);
            PairedSample sample;
            sample.label = int(c);
            sample.audio.resize(spec.d_audio);
            sample.visual.resize(spec.d_visual);
            for (std::size_t j = 0; j < spec.d_audio; ++j)
                sample.audio[j] = audio.at(0, j) + crng.normal() * spec.noise_sigma;
            for (std::size_t j = 0; j < spec.d_visual; ++j)
                sample.visual[j] = visual.at(0, j) + crng.normal() * spec.noise_sigma;
            ds.samples.push_back(std::move(sample));
        }
    }
    ds.rebuild_index();
    return ds;
}

inline SplitSpec split_classes(const Dataset& ds, std::size_t novel_count,
                               std::uint64_t seed) {
    const std::size_t n = ds.class_count();
    if (novel_count < 1 || novel_count >= n)
        throw ConfigError("split: novel_count " + std::to_string(novel_count) +
                          " must be in [1, " + std::to_string(n) + ")");
    std::vector<int> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = int(i);
    RngStream rng = RngStream(seed).derive("class-split");
    for (std::size_t i = n; i > 1; --i)
        std::swap(ids[i - 1], ids[rng.uniform_below(i)]);
    SplitSpec split;
    for (std::size_t i = 0; i < novel_count; ++i) split.novel_classes.insert(ids[i]);
    for (std::size_t i = novel_count; i < n; ++i) split.base_classes.insert(ids[i]);
    return split;
}

inline Episode sample_episode(const Dataset& ds, const std::set<int>& classes,
                              std::size_t way, std::size_t shot,
                              std::size_t query_per_class, RngStream& rng) {
    if (classes.size() < way)
        throw SamplingError("episode: need " + std::to_string(way) +
                            " classes, only " + std::to_string(classes.size()) +
                            " available");
    std::vector<int> pool(classes.begin(), classes.end());
    // partial Fisher-Yates: first `way` entries are a uniform draw w/o replacement
    for (std::size_t i = 0; i < way; ++i)
        std::swap(pool[i], pool[i + rng.uniform_below(pool.size() - i)]);

    Episode ep;
    ep.way = way;
    ep.shot = shot;
    ep.query_per_class = query_per_class;
    const std::size_t need = shot + query_per_class;
    for (std::size_t slot = 0; slot < way; ++slot) {
        const int cls = pool[slot];
        ep.class_of_slot.push_back(cls);
        std::vector<std::size_t> idx = ds.by_class[std::size_t(cls)];
        if (idx.size() < need)
            throw SamplingError("episode: class " + std::to_string(cls) + " has " +
                                std::to_string(idx.size()) + " samples, need " +
                                std::to_string(need));
        for (std::size_t i = 0; i < need; ++i)
            std::swap(idx[i], idx[i + rng.uniform_below(idx.size() - i)]);
        for (std::size_t i = 0; i < shot; ++i) ep.support.emplace_back(idx[i], slot);
        for (std::size_t i = shot; i < need; ++i) ep.query.emplace_back(idx[i], slot);
    }
    return ep;
}

// Stack the audio (or visual) rows of the given (index, slot) list.
inline Tensor2 gather_audio(const Dataset& ds,
                            const std::vector<std::pair<std::size_t, std::size_t>>& refs) {
    Tensor2 out(refs.size(), ds.d_audio);
    for (std::size_t i = 0; i < refs.size(); ++i)
        for (std::size_t j = 0; j < ds.d_audio; ++j)
            out.at(i, j) = ds.samples[refs[i].first].audio[j];
    return out;
}

inline Tensor2 gather_visual(const Dataset& ds,
                             const std::vector<std::pair<std::size_t, std::size_t>>& refs) {
    Tensor2 out(refs.size(), ds.d_visual);
    for (std::size_t i = 0; i < refs.size(); ++i)
        for (std::size_t j = 0; j < ds.d_visual; ++j)
            out.at(i, j) = ds.samples[refs[i].first].visual[j];
    return out;
}

inline std::vector<std::size_t> gather_slots(
    const std::vector<std::pair<std::size_t, std::size_t>>& refs) {
    std::vector<std::size_t> slots;
    slots.reserve(refs.size());
    for (const auto& r : refs) slots.push_back(r.second);
    return slots;
}

// ---------------------------------------------------------------------------
// Feature file ("HVNF") + CSV ingestion
// ---------------------------------------------------------------------------

namespace hvnf {

constexpr char kMagic[4] = {'H', 'V', 'N', 'F'};
constexpr std::uint16_t kVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, std::size_t& offset, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError(std::string("truncated reading ") + what, offset);
    offset += sizeof(T);
    return v;
}

}  // namespace detail

inline void save(const Dataset& ds, std::ostream& os) {
    os.write(kMagic, 4);
    detail::write_pod<std::uint16_t>(os, kVersion);
    detail::write_pod<std::uint32_t>(os, std::uint32_t(ds.samples.size()));
    detail::write_pod<std::uint32_t>(os, std::uint32_t(ds.d_audio));
    detail::write_pod<std::uint32_t>(os, std::uint32_t(ds.d_visual));
    detail::write_pod<std::uint32_t>(os, std::uint32_t(ds.class_names.size()));
    for (const auto& name : ds.class_names) {
        detail::write_pod<std::uint32_t>(os, std::uint32_t(name.size()));
        os.write(name.data(), std::streamsize(name.size()));
    }
    for (const auto& s : ds.samples) {
        detail::write_pod<std::uint32_t>(os, std::uint32_t(s.label));
        os.write(reinterpret_cast<const char*>(s.audio.data()),
                 std::streamsize(s.audio.size() * sizeof(double)));
        os.write(reinterpret_cast<const char*>(s.visual.data()),
                 std::streamsize(s.visual.size() * sizeof(double)));
    }
}

inline void save(const Dataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + path + "' for writing", 0);
    save(ds, os);
    if (!os) throw FormatError("write failed for '" + path + "'", 0);
}

inline Dataset load(std::istream& is) {
    std::size_t offset = 0;
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad feature-file magic", 0);
    offset += 4;
    const auto version = detail::read_pod<std::uint16_t>(is, offset, "version");
    if (version != kVersion)
        throw FormatError("unsupported feature-file version " + std::to_string(version),
                          offset - sizeof(std::uint16_t));
    const auto sample_count = detail::read_pod<std::uint32_t>(is, offset, "sample count");
    Dataset ds;
    ds.d_audio = detail::read_pod<std::uint32_t>(is, offset, "d_audio");
    ds.d_visual = detail::read_pod<std::uint32_t>(is, offset, "d_visual");
    const auto class_count = detail::read_pod<std::uint32_t>(is, offset, "class count");
    for (std::uint32_t c = 0; c < class_count; ++c) {
        const auto len = detail::read_pod<std::uint32_t>(is, offset, "class name length");
        std::string name(len, '\0');
        is.read(name.data(), std::streamsize(len));
        if (!is) throw FormatError("truncated class name", offset);
        offset += len;
        ds.class_names.push_back(std::move(name));
    }
    for (std::uint32_t i = 0; i < sample_count; ++i) {
        PairedSample s;
        const auto label = detail::read_pod<std::uint32_t>(is, offset, "sample label");
        if (label >= class_count)
            throw FormatError("sample " + std::to_string(i) + " label " +
                                  std::to_string(label) + " >= class count",
                              offset - sizeof(std::uint32_t));
        s.label = int(label);
        s.audio.resize(ds.d_audio);
        s.visual.resize(ds.d_visual);
        is.read(reinterpret_cast<char*>(s.audio.data()),
                std::streamsize(s.audio.size() * sizeof(double)));
        if (!is) throw FormatError("truncated audio block of sample " + std::to_string(i),
                                   offset);
        offset += s.audio.size() * sizeof(double);
        is.read(reinterpret_cast<char*>(s.visual.data()),
                std::streamsize(s.visual.size() * sizeof(double)));
        if (!is)
            throw FormatError("truncated visual block of sample " + std::to_string(i),
                              offset);
        offset += s.visual.size() * sizeof(double);
        ds.samples.push_back(std::move(s));
    }
    ds.rebuild_index();
    return ds;
}

inline Dataset load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + path + "'", 0);
    return load(is);
}

// CSV alternative: header `label,a_0..a_{dA-1},v_0..v_{dV-1}`. Labels may be
// arbitrary strings; they are remapped to dense ids in sorted order.
inline Dataset load_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty CSV", 0);
    std::size_t d_a = 0, d_v = 0;
    {
        std::stringstream hs(line);
        std::string col;
        if (!std::getline(hs, col, ',') || col != "label")
            throw FormatError("CSV header must start with 'label'", 0);
        while (std::getline(hs, col, ',')) {
            if (col.rfind("a_", 0) == 0)
                ++d_a;
            else if (col.rfind("v_", 0) == 0)
                ++d_v;
            else
                throw FormatError("unexpected CSV column '" + col + "'", 0);
        }
    }
    if (d_a == 0 || d_v == 0) throw FormatError("CSV header names no a_*/v_* columns", 0);

    struct RawRow {
        std::string label;
        std::vector<double> values;
    };
    std::vector<RawRow> rows;
    std::size_t offset = line.size() + 1;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ls(line);
        RawRow r;
        std::string cell;
        if (!std::getline(ls, cell, ','))
            throw FormatError("CSV line " + std::to_string(line_no) + " has no label",
                              offset);
        r.label = cell;
        while (std::getline(ls, cell, ',')) {
            try {
                r.values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw FormatError("CSV line " + std::to_string(line_no) +
                                      ": bad number '" + cell + "'",
                                  offset);
            }
        }
        if (r.values.size() != d_a + d_v)
            throw FormatError("CSV line " + std::to_string(line_no) + " has " +
                                  std::to_string(r.values.size()) + " values, expected " +
                                  std::to_string(d_a + d_v),
                              offset);
        offset += line.size() + 1;
        rows.push_back(std::move(r));
    }

    std::map<std::string, int> label_map;
    for (const auto& r : rows) label_map.emplace(r.label, 0);
    int next_id = 0;
    for (auto& [name, id] : label_map) id = next_id++;

    Dataset ds;
    ds.d_audio = d_a;
    ds.d_visual = d_v;
    ds.class_names.resize(label_map.size());
    for (const auto& [name, id] : label_map) ds.class_names[std::size_t(id)] = name;
    for (const auto& r : rows) {
        PairedSample s;
        s.label = label_map[r.label];
        s.audio.assign(r.values.begin(), r.values.begin() + std::ptrdiff_t(d_a));
        s.visual.assign(r.values.begin() + std::ptrdiff_t(d_a), r.values.end());
        ds.samples.push_back(std::move(s));
    }
    ds.rebuild_index();
    return ds;
}

inline Dataset load_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open '" + path + "'", 0);
    return load_csv(is);
}

}  // namespace hvnf

}  // namespace havenet
