#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gem::datagen {

inline constexpr std::string_view kObjectPlaceholder = "<object>";
inline constexpr size_t kPromptCount = 23;

/// Language prompt templates; each contains `<object>` exactly once.
struct PromptBank {
    std::vector<std::string> templates;
    std::string object = "transparent glasses";

    /// The built-in 23-template bank.
    static PromptBank standard();
    /// JSON document {"object": "...", "templates": ["...", ...]}.
    static PromptBank load(const std::filesystem::path& path);

    /// Throws ConfigError unless there are exactly 23 templates with one placeholder each.
    void validate() const;
    [[nodiscard]] std::string instantiate(size_t index) const;
};

}  // namespace gem::datagen
