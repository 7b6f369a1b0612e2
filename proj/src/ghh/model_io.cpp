#include "kpl/model_io.hpp"

#include <fstream>

#include <json.hpp>

namespace kpl::ghh {

using nlohmann::json;

namespace {

json norm_to_json(const img::StackNorm& norm) {
    json arr = json::array();
    for (const auto& cn : norm) arr.push_back({{"mean", cn.mean}, {"scale", cn.scale}});
    return arr;
}

img::StackNorm norm_from_json(const json& arr) {
    if (!arr.is_array() || arr.size() != img::kFeatureChannels)
        throw DataError("model: normalization must have 6 entries");
    img::StackNorm norm;
    for (std::size_t c = 0; c < norm.size(); ++c) {
        norm[c].mean = arr[c].at("mean").get<double>();
        norm[c].scale = arr[c].at("scale").get<double>();
    }
    return norm;
}

json separable_to_json(const sep::SeparableBank& bank) {
    json per_channel = json::array();
    for (const auto& cb : bank.per_channel) {
        json filters = json::array();
        for (const auto& f : cb.filters) filters.push_back({{"row", f.row}, {"col", f.col}});
        per_channel.push_back({{"filters", filters}});
    }
    json coeffs = json::array();
    for (const auto& comp : bank.coefficients) {
        json jcomp = json::array();
        for (const auto& hp : comp) {
            json jhp = json::array();
            for (const auto& chan : hp) jhp.push_back(chan);
            jcomp.push_back(jhp);
        }
        coeffs.push_back(jcomp);
    }
    return {{"S", bank.rank},
            {"per_channel", per_channel},
            {"coefficients", coeffs},
            {"model_hash", bank.model_hash},
            {"total_error", bank.total_error},
            {"per_filter_error", bank.per_filter_error}};
}

sep::SeparableBank separable_from_json(const json& j, int patch_size) {
    sep::SeparableBank bank;
    bank.rank = j.at("S").get<int>();
    bank.patch_size = patch_size;
    bank.model_hash = j.at("model_hash").get<std::uint64_t>();
    bank.total_error = j.value("total_error", 0.0);
    if (j.contains("per_filter_error"))
        bank.per_filter_error = j.at("per_filter_error").get<std::vector<std::vector<double>>>();
    const auto& pcs = j.at("per_channel");
    if (!pcs.is_array() || pcs.size() != img::kFeatureChannels)
        throw DataError("model: separable.per_channel must have 6 entries");
    for (std::size_t c = 0; c < bank.per_channel.size(); ++c) {
        for (const auto& jf : pcs[c].at("filters")) {
            sep::SeparableFilter f;
            f.row = jf.at("row").get<std::vector<double>>();
            f.col = jf.at("col").get<std::vector<double>>();
            bank.per_channel[c].filters.push_back(std::move(f));
        }
    }
    for (const auto& jcomp : j.at("coefficients")) {
        std::vector<std::array<std::vector<double>, img::kFeatureChannels>> comp;
        for (const auto& jhp : jcomp) {
            std::array<std::vector<double>, img::kFeatureChannels> hp;
            if (jhp.size() != img::kFeatureChannels)
                throw DataError("model: separable coefficients must cover 6 channels");
            for (std::size_t c = 0; c < hp.size(); ++c) hp[c] = jhp[c].get<std::vector<double>>();
            comp.push_back(std::move(hp));
        }
        bank.coefficients.push_back(std::move(comp));
    }
    return bank;
}

}  // namespace

std::string serialize_model(const ModelFile& mf) {
    const GhhModel& m = mf.model;
    m.validate();
    json filters = json::array();
    const int p2 = m.patch_size * m.patch_size;
    for (int n = 0; n < m.num_components(); ++n) {
        json comp = json::array();
        for (int mm = 0; mm < m.hyperplanes_per_component(); ++mm) {
            const auto& hp = m.filters[static_cast<std::size_t>(n)][static_cast<std::size_t>(mm)];
            json channels = json::array();
            for (int c = 0; c < img::kFeatureChannels; ++c) {
                std::vector<double> taps(static_cast<std::size_t>(p2));
                for (int i = 0; i < p2; ++i) taps[static_cast<std::size_t>(i)] = hp.taps(c * p2 + i);
                channels.push_back(taps);
            }
            comp.push_back({{"bias", hp.bias}, {"channels", channels}});
        }
        filters.push_back(comp);
    }
    json doc = {{"version", kModelSchemaVersion},
                {"N", m.num_components()},
                {"M", m.hyperplanes_per_component()},
                {"patch_size", m.patch_size},
                {"delta", m.delta},
                {"normalization", norm_to_json(m.normalization)},
                {"filters", filters}};
    if (mf.separable) doc["separable"] = separable_to_json(*mf.separable);
    return doc.dump(2);
}

ModelFile deserialize_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("model: invalid JSON: ") + e.what());
    }
    try {
        if (doc.at("version").get<int>() != kModelSchemaVersion)
            throw DataError("model: unsupported schema version");
        ModelFile mf;
        GhhModel& m = mf.model;
        const int N = doc.at("N").get<int>();
        const int M = doc.at("M").get<int>();
        m.patch_size = doc.at("patch_size").get<int>();
        m.delta = doc.at("delta").get<std::vector<int>>();
        m.normalization = norm_from_json(doc.at("normalization"));
        const int p2 = m.patch_size * m.patch_size;
        const auto& jfilters = doc.at("filters");
        if (static_cast<int>(jfilters.size()) != N) throw DataError("model: filter count != N");
        for (const auto& jcomp : jfilters) {
            if (static_cast<int>(jcomp.size()) != M) throw DataError("model: hyperplane count != M");
            std::vector<Hyperplane> comp;
            for (const auto& jhp : jcomp) {
                Hyperplane hp;
                hp.bias = jhp.at("bias").get<double>();
                hp.taps = Eigen::VectorXd(patch_dim(m.patch_size));
                const auto& channels = jhp.at("channels");
                if (static_cast<int>(channels.size()) != img::kFeatureChannels)
                    throw DataError("model: expected 6 channels per filter");
                for (int c = 0; c < img::kFeatureChannels; ++c) {
                    const auto taps = channels[static_cast<std::size_t>(c)].get<std::vector<double>>();
                    if (static_cast<int>(taps.size()) != p2)
                        throw DataError("model: tap count != patch_size^2");
                    for (int i = 0; i < p2; ++i) hp.taps(c * p2 + i) = taps[static_cast<std::size_t>(i)];
                }
                comp.push_back(std::move(hp));
            }
            m.filters.push_back(std::move(comp));
        }
        m.validate();
        if (doc.contains("separable"))
            mf.separable = separable_from_json(doc["separable"], m.patch_size);
        return mf;
    } catch (const json::exception& e) {
        throw DataError(std::string("model: missing or mistyped field: ") + e.what());
    }
}

void save_model(const std::string& path, const ModelFile& mf) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model: " + path);
    const std::string text = serialize_model(mf);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out << '\n';
    if (!out) throw DataError("short write: " + path);
}

ModelFile load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(text);
}

}  // namespace kpl::ghh
