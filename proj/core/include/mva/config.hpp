#pragma once

#include <map>
#include <string>
#include <vector>

namespace mva {

// Flat key-value configuration: "key = value" lines, '#' comments.
// Every tunable knob in the library reads through here so experiment
// settings are reproducible from one file.
class Config {
public:
    Config() = default;

    static Config load(const std::string& path);
    void save(const std::string& path) const;

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set(const std::string& key, double value);
    void set(const std::string& key, int value);

    std::string get(const std::string& key, const std::string& fallback) const;
    double get(const std::string& key, double fallback) const;
    int get(const std::string& key, int fallback) const;
    bool get(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace mva
