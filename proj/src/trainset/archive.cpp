#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "kpl/error.hpp"
#include "kpl/trainset.hpp"

namespace kpl::trainset {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'T', 'S', 'E', 'T'};
constexpr std::uint32_t kArchiveVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw DataError("training-set archive: truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw DataError("training-set archive: truncated header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_trainset(const std::string& path, const TrainingSet& ts) {
    json header;
    header["patch_size"] = ts.patch_size;
    header["count"] = ts.count();
    header["dim"] = ts.dim();
    header["seed"] = ts.seed;
    json norm = json::array();
    for (const auto& cn : ts.normalization) norm.push_back({{"mean", cn.mean}, {"scale", cn.scale}});
    header["normalization"] = std::move(norm);
    json samples = json::array();
    for (const auto& s : ts.samples)
        samples.push_back({{"label", s.label}, {"group", s.group}, {"image", s.image_id}});
    header["samples"] = std::move(samples);
    const std::string header_str = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kArchiveVersion);
    write_u64(os, header_str.size());
    os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

    // Patch block: row-major float64, one row per sample.
    std::vector<double> rowbuf(static_cast<std::size_t>(ts.dim()));
    for (int i = 0; i < ts.count(); ++i) {
        for (int j = 0; j < ts.dim(); ++j) rowbuf[static_cast<std::size_t>(j)] = ts.patches(i, j);
        os.write(reinterpret_cast<const char*>(rowbuf.data()),
                 static_cast<std::streamsize>(rowbuf.size() * sizeof(double)));
    }
    if (!os) throw DataError("write failed: " + path);
}

TrainingSet load_trainset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a training-set archive: " + path);
    const std::uint32_t version = read_u32(is);
    if (version != kArchiveVersion)
        throw DataError("unsupported training-set archive version " + std::to_string(version));
    const std::uint64_t header_size = read_u64(is);
    std::string header_str(header_size, '\0');
    is.read(header_str.data(), static_cast<std::streamsize>(header_size));
    if (!is) throw DataError("training-set archive: truncated header");

    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception& e) {
        throw DataError(std::string("training-set archive: bad header: ") + e.what());
    }

    TrainingSet ts;
    try {
        ts.patch_size = header.at("patch_size").get<int>();
        ts.seed = header.at("seed").get<std::uint64_t>();
        const int K = header.at("count").get<int>();
        const int D = header.at("dim").get<int>();
        if (K < 0 || D <= 0) throw DataError("training-set archive: bad dimensions");
        const auto& norm = header.at("normalization");
        if (!norm.is_array() || norm.size() != img::kFeatureChannels)
            throw DataError("training-set archive: bad normalization block");
        for (std::size_t c = 0; c < norm.size(); ++c)
            ts.normalization[c] = {norm[c].at("mean").get<double>(), norm[c].at("scale").get<double>()};
        const auto& samples = header.at("samples");
        if (!samples.is_array() || static_cast<int>(samples.size()) != K)
            throw DataError("training-set archive: sample list and count disagree");
        ts.samples.reserve(samples.size());
        for (const auto& s : samples)
            ts.samples.push_back(
                {s.at("label").get<int>(), s.at("group").get<int>(), s.at("image").get<int>()});
        ts.patches.resize(K, D);
    } catch (const json::exception& e) {
        throw DataError(std::string("training-set archive: bad header: ") + e.what());
    }

    std::vector<double> rowbuf(static_cast<std::size_t>(ts.dim()));
    for (int i = 0; i < ts.count(); ++i) {
        is.read(reinterpret_cast<char*>(rowbuf.data()),
                static_cast<std::streamsize>(rowbuf.size() * sizeof(double)));
        if (!is) throw DataError("training-set archive: truncated patch block");
        for (int j = 0; j < ts.dim(); ++j) ts.patches(i, j) = rowbuf[static_cast<std::size_t>(j)];
    }
    for (int i = 0; i < ts.count(); ++i)
        ts.groups[ts.samples[static_cast<std::size_t>(i)].group].push_back(i);
    return ts;
}

std::vector<Candidate> load_candidate_file(const std::string& path, int image_id) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open: " + path);
    std::vector<Candidate> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        Candidate c;
        c.image_id = image_id;
        if (!(ls >> c.x >> c.y >> c.scale >> c.response))
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": expected 'x y scale response'");
        out.push_back(c);
    }
    return out;
}

}  // namespace kpl::trainset
