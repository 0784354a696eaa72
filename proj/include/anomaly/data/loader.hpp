#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "anomaly/data/codec.hpp"
#include "anomaly/data/image.hpp"

namespace anomaly {

struct LoadReport {
    std::vector<std::string> warnings;  // one entry per skipped file, with its path
};

namespace detail {

inline std::vector<std::filesystem::path> sorted_files(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().filename().string().starts_with('.')) continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    return files;
}

inline std::vector<std::filesystem::path> sorted_subdirs(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    return dirs;
}

inline void load_folder(const std::filesystem::path& dir, Split split, Label label, const std::string& kind,
                        Dataset& ds, LoadReport* report) {
    for (const auto& file : sorted_files(dir)) {
        try {
            ds.samples.push_back({read_image(file), label, kind, split, file.string()});
        } catch (const DataError& e) {
            if (report) report->warnings.emplace_back(e.what());
        }
    }
}

}  // namespace detail

/// Load `<root>/<class_name>/{train/good, test/*}`. Test images under test/good
/// are labeled good, every other test subfolder defect (its folder name becomes
/// defect_kind). Files load in lexicographic order; undecodable files are
/// skipped and listed in `report`.
inline Dataset load_image_dir(const std::filesystem::path& root, const std::string& class_name,
                              LoadReport* report = nullptr) {
    namespace fs = std::filesystem;
    const fs::path base = root / class_name;
    const fs::path train_dir = base / "train" / "good";
    const fs::path test_dir = base / "test";
    if (!fs::is_directory(base)) throw DataError("missing class directory " + base.string());
    if (!fs::is_directory(train_dir)) throw DataError("missing directory " + train_dir.string());
    if (!fs::is_directory(test_dir)) throw DataError("missing directory " + test_dir.string());

    Dataset ds;
    ds.class_name = class_name;
    detail::load_folder(train_dir, Split::train, Label::good, "good", ds, report);
    if (ds.samples.empty()) throw DataError("no training images in " + train_dir.string());
    for (const auto& sub : detail::sorted_subdirs(test_dir)) {
        const std::string kind = sub.filename().string();
        detail::load_folder(sub, Split::test, kind == "good" ? Label::good : Label::defect, kind, ds, report);
    }
    return ds;
}

}  // namespace anomaly
