#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "relulab/config.hpp"
#include "relulab/optimizer.hpp"

namespace relulab {

inline constexpr int kReportSchemaVersion = 1;

struct WrittenFile {
    /// Relative to the output directory, with forward slashes.
    std::string path;
    std::string hash;
    std::size_t bytes = 0;
};

/// Collects the files of one run. Each write goes to its own path, so
/// workers may write concurrently as long as they use distinct names.
class RunWriter {
public:
    explicit RunWriter(std::filesystem::path dir);

    const std::filesystem::path& dir() const noexcept { return dir_; }
    WrittenFile write(const std::string& relative, const std::string& content) const;
    /// Records a file written earlier; the manifest lists files sorted by path.
    void add(WrittenFile file);
    const std::vector<WrittenFile>& files() const noexcept { return files_; }

private:
    std::filesystem::path dir_;
    std::vector<WrittenFile> files_;
};

/// One JSON object per snapshot; theta only when the snapshot kept it.
std::string trace_jsonl(const TrainTrace& trace);

struct ManifestInfo {
    std::string command;
    /// Extra inputs a replay needs, e.g. a parameter vector.
    nlohmann::json inputs = nlohmann::json::object();
    double wall_seconds = 0.0;
};

/// Writes manifest.json next to the outputs and returns its path.
std::filesystem::path write_manifest(const RunWriter& writer, const RunConfig& config, const ManifestInfo& info);

std::string file_hash(const std::string& content);
std::string read_file(const std::filesystem::path& file);

} // namespace relulab
