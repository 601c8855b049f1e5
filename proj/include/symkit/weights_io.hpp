#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "symkit/common.hpp"
#include "symkit/tensor.hpp"

namespace symkit {

// Weight fixture file: a magic line, scalar metadata lines, a manifest of
// component names, then one named tensor block per component in manifest
// order.
//
//   symkit-weights v1
//   activation: tanh
//   components: mlp.0.weight mlp.0.bias ...
//   mlp.0.weight
//   shape: 2 2
//   ...
inline void write_weights_file(const std::filesystem::path& path,
                               const std::vector<std::pair<std::string, std::string>>& meta,
                               const std::vector<std::pair<std::string, Tensor>>& tensors) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write weights file: " + path.string());
    os << "symkit-weights v1\n";
    for (const auto& [key, value] : meta) os << key << ": " << value << '\n';
    os << "components:";
    for (const auto& [name, t] : tensors) os << ' ' << name;
    os << '\n';
    for (const auto& [name, t] : tensors) {
        os << name << '\n';
        write_tensor_text(os, t);
    }
}

struct WeightsFile {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& get(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return t;
        throw SchemaError("weights file: missing component '" + name + "'");
    }
    std::string meta_value(const std::string& key, const std::string& fallback) const {
        for (const auto& [k, v] : meta)
            if (k == key) return v;
        return fallback;
    }
};

inline WeightsFile read_weights_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read weights file: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != "symkit-weights v1")
        throw SchemaError("weights file: bad magic line in " + path.string());

    WeightsFile out;
    std::vector<std::string> names;
    while (std::getline(is, line)) {
        if (line.rfind("components:", 0) == 0) {
            std::istringstream ss(line.substr(11));
            std::string name;
            while (ss >> name) names.push_back(name);
            break;
        }
        const auto colon = line.find(':');
        if (colon == std::string::npos)
            throw SchemaError("weights file: expected 'key: value' metadata, got '" + line + "'");
        std::string value = line.substr(colon + 1);
        if (!value.empty() && value.front() == ' ') value.erase(0, 1);
        out.meta.emplace_back(line.substr(0, colon), value);
    }
    for (const std::string& expected : names) {
        std::string name;
        if (!(is >> name) || name != expected)
            throw SchemaError("weights file: component '" + expected + "' missing or out of order");
        out.tensors.emplace_back(name, read_tensor_text(is));
    }
    return out;
}

}  // namespace symkit
