#include "gem/datagen/prompt_bank.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "gem/error.hpp"

namespace gem::datagen {

PromptBank PromptBank::standard() {
    PromptBank bank;
    bank.templates = {
        "a photo of a clean <object>",
        "a close-up photo of the <object>",
        "a rendition of the <object>",
        "a photo of the <object>",
        "a bright photo of the <object>",
        "a dark photo of the <object>",
        "a cropped photo of the <object>",
        "a good photo of the <object>",
        "a photo of one <object>",
        "a low resolution photo of the <object>",
        "a blurry photo of the <object>",
        "a photo of a large <object>",
        "a photo of a small <object>",
        "a photo of the nice <object>",
        "a photo of the weird <object>",
        "a jpeg photo of the <object>",
        "a photo of the cool <object>",
        "a bad photo of the <object>",
        "a photo of a dirty <object>",
        "itap of the <object>",
        "a close-up photo of a <object>",
        "a rendering of a <object>",
        "a photo of the <object> in a room",
    };
    return bank;
}

PromptBank PromptBank::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open prompt bank " + path.string());
    }
    PromptBank bank;
    try {
        auto doc = nlohmann::json::parse(in);
        bank.templates = doc.at("templates").get<std::vector<std::string>>();
        if (doc.contains("object")) {
            bank.object = doc["object"].get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed prompt bank " + path.string() + ": " + e.what());
    }
    bank.validate();
    return bank;
}

void PromptBank::validate() const {
    if (templates.size() != kPromptCount) {
        throw ConfigError("prompt bank must hold exactly " + std::to_string(kPromptCount) + " templates, got " +
                          std::to_string(templates.size()));
    }
    for (const auto& t : templates) {
        const auto first = t.find(kObjectPlaceholder);
        if (first == std::string::npos || t.find(kObjectPlaceholder, first + 1) != std::string::npos) {
            throw ConfigError("template must contain <object> exactly once: '" + t + "'");
        }
    }
}

std::string PromptBank::instantiate(size_t index) const {
    std::string text = templates.at(index);
    const auto pos = text.find(kObjectPlaceholder);
    text.replace(pos, kObjectPlaceholder.size(), object);
    return text;
}

}  // namespace gem::datagen
