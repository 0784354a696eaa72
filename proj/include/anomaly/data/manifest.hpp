#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "anomaly/data/codec.hpp"
#include "anomaly/data/image.hpp"

namespace anomaly {

inline constexpr const char* kManifestName = "manifest.csv";
inline constexpr const char* kManifestHeader = "path,label,defect_kind,split";

/// Write every sample as PGM/PPM under `dir` plus manifest.csv
/// (`path,label,defect_kind,split`, paths relative to `dir`).
inline void save_dataset_cache(const Dataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream manifest(dir / kManifestName);
    if (!manifest) throw DataError("cannot write " + (dir / kManifestName).string());
    manifest << kManifestHeader << '\n';
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        if (s.defect_kind.empty() || s.defect_kind.find_first_of(",\n\"/\\") != std::string::npos) {
            throw DataError("defect kind '" + s.defect_kind + "' cannot be stored in the manifest");
        }
        std::ostringstream name;
        name << std::setw(4) << std::setfill('0') << i << (s.pixels.shape().c == 1 ? ".pgm" : ".ppm");
        const fs::path rel = fs::path(std::string(to_string(s.split))) / s.defect_kind / name.str();
        fs::create_directories(dir / rel.parent_path());
        pnm::write(dir / rel, s.pixels);
        manifest << rel.generic_string() << ',' << to_string(s.label) << ',' << s.defect_kind << ','
                 << to_string(s.split) << '\n';
    }
    if (!manifest) throw DataError("failed writing " + (dir / kManifestName).string());
}

inline Dataset load_dataset_cache(const std::filesystem::path& dir, const std::string& class_name = "cached") {
    std::ifstream in(dir / kManifestName);
    if (!in) throw DataError("missing " + (dir / kManifestName).string());
    std::string line;
    if (!std::getline(in, line) || line != kManifestHeader) {
        throw DataError((dir / kManifestName).string() + ": unexpected header");
    }
    Dataset ds;
    ds.class_name = class_name;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
        if (fields.size() != 4) {
            throw DataError(kManifestName + (":" + std::to_string(lineno)) + ": expected 4 fields");
        }
        ImageSample s;
        s.source_path = (dir / fields[0]).string();
        s.pixels = read_image(dir / fields[0]);
        s.label = parse_label(fields[1]);
        s.defect_kind = fields[2];
        s.split = parse_split(fields[3]);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace anomaly
