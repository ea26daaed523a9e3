#include "relulab/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "relulab/errors.hpp"
#include "relulab/hash.hpp"
#include "relulab/version.hpp"

namespace relulab {

namespace fs = std::filesystem;

std::string file_hash(const std::string& content) {
    return hex64(fnv1a64(content));
}

std::string read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw Error("cannot read '" + file.string() + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunWriter::RunWriter(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) {
        throw Error("cannot create output directory '" + dir_.string() + "': " + ec.message());
    }
}

WrittenFile RunWriter::write(const std::string& relative, const std::string& content) const {
    const fs::path target = dir_ / relative;
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write '" + target.string() + "'");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw Error("short write to '" + target.string() + "'");
    }
    return {relative, file_hash(content), content.size()};
}

void RunWriter::add(WrittenFile file) {
    files_.push_back(std::move(file));
}

std::string trace_jsonl(const TrainTrace& trace) {
    std::string out;
    for (const auto& s : trace.snapshots) {
        nlohmann::json j{{"step", s.step},
                         {"gradient_norm", s.gradient_norm},
                         {"inactive", s.inactive},
                         {"trapped", s.trapped}};
        j["risk"] = s.risk ? nlohmann::json(*s.risk) : nlohmann::json(nullptr);
        j["empirical_risk"] = s.empirical_risk ? nlohmann::json(*s.empirical_risk) : nlohmann::json(nullptr);
        if (!s.theta.empty()) {
            j["theta"] = s.theta;
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

fs::path write_manifest(const RunWriter& writer, const RunConfig& config, const ManifestInfo& info) {
    auto files = writer.files();
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    nlohmann::json listed = nlohmann::json::array();
    for (const auto& f : files) {
        listed.push_back({{"path", f.path}, {"hash", f.hash}, {"bytes", f.bytes}});
    }
    auto cfg = config.to_json();
    cfg.erase("output_dir");
    const nlohmann::json manifest{{"schema_version", kReportSchemaVersion},
                                  {"library_version", kLibraryVersion},
                                  {"command", info.command},
                                  {"config", cfg},
                                  {"fingerprint", config.fingerprint()},
                                  {"seed", config.seed},
                                  {"inputs", info.inputs},
                                  {"files", listed},
                                  {"timing", {{"wall_seconds", info.wall_seconds}}}};
    writer.write("manifest.json", manifest.dump(2) + "\n");
    return writer.dir() / "manifest.json";
}

} // namespace relulab
