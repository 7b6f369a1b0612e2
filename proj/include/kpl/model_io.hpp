#pragma once

#include <optional>
#include <string>

#include "kpl/ghh.hpp"
#include "kpl/sepfilters.hpp"

namespace kpl::ghh {

inline constexpr int kModelSchemaVersion = 1;

// Model document bundled with its optional separable section. Field names
// are pinned by docs/model.schema.json.
struct ModelFile {
    GhhModel model;
    std::optional<sep::SeparableBank> separable;
};

std::string serialize_model(const ModelFile& mf);
ModelFile deserialize_model(const std::string& json_text);

void save_model(const std::string& path, const ModelFile& mf);
ModelFile load_model(const std::string& path);

}  // namespace kpl::ghh
