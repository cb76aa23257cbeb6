#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tslearn/data.hpp"
#include "tslearn/train.hpp"

namespace tsl {

// INI-style experiment file: `# comments`, `[section]` headers, `key = value`.
class ConfigFile {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static ConfigFile parse(const std::string& text);
    static ConfigFile read(const std::filesystem::path& path);

    bool has_section(const std::string& section) const { return sections_.count(section) != 0; }
    bool has(const std::string& section, const std::string& key) const;
    const Entry* find(const std::string& section, const std::string& key) const;
    const Entry& require(const std::string& section, const std::string& key) const;
    const std::map<std::string, std::map<std::string, Entry>>& sections() const { return sections_; }
    int section_line(const std::string& section) const;

private:
    std::map<std::string, std::map<std::string, Entry>> sections_;
    std::map<std::string, int> section_lines_;
};

struct DataConfig {
    enum class Kind { Synthetic, Records };
    Kind kind = Kind::Synthetic;
    std::size_t classes = 10;
    Shape image_shape = kCifarImageShape;
    // synthetic
    std::size_t train_per_class = 100;
    std::size_t test_per_class = 50;
    double noise = 0.2;
    double contrast = SyntheticConfig{}.contrast;
    std::uint32_t seed = 1;
    // records
    std::vector<std::filesystem::path> train_files;
    std::filesystem::path test_file;
};

struct Experiment {
    TrainConfig train;
    DataConfig data;
};

// Builds an experiment, rejecting unknown sections/keys and missing required
// keys for the configured mode. Relative data paths resolve against base_dir.
Experiment parse_experiment(const ConfigFile& file, const std::filesystem::path& base_dir = {});

std::pair<Dataset, Dataset> load_data(const DataConfig& config);

}  // namespace tsl
