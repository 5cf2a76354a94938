#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace comodel {

enum class SceneErrc {
    invalid_name,
    invalid_primitive_params,
    invalid_transform,
    invalid_material,
    unknown_object,
    malformed_document,
};

/// Snake-case wire code ("unknown_object", ...) used in tool results and reports.
std::string_view to_string(SceneErrc code);

class SceneError : public std::runtime_error {
public:
    SceneError(SceneErrc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    SceneErrc code() const noexcept { return code_; }

private:
    SceneErrc code_;
};

}  // namespace comodel
