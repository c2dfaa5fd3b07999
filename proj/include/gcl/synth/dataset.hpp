#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gcl/synth/body.hpp"

namespace gcl::synth {

enum class Split { train, query, gallery };
std::string split_name(Split s);
Split split_from_name(const std::string& s);

/// One dataset instance: either synthesis parameters (rendered on demand) or
/// file-backed paths with pre-rendered rotation structure maps.
struct Record {
    bool synthetic = true;
    int identity = 0;  // verification-only ground truth
    int camera = 0;
    PoseSpec pose;            // yaw_step doubles as the manifest yaw field
    IdentitySpec ident;       // synthetic only
    std::string image_path;   // file-backed only
    std::array<std::string, kYawSteps> rot_paths{};  // file-backed structure maps
    bool has_rotations = true;  // false: excluded from generative pathways
    Split split = Split::train;
};

struct SynthConfig {
    int train_identities = 50;
    int test_identities = 20;
    int cameras = 2;
    int height = 64;
    int width = 32;
    int seed = 0;
};

struct DatasetManifest {
    std::vector<Record> records;
    int height = 64;
    int width = 32;
    std::vector<std::string> warnings;  // record-level ingest issues

    std::vector<int> split_indices(Split s) const;
};

/// Procedural dataset: one image per (identity, camera, yaw step); train and
/// test identity pools are disjoint, test images split into camera-0 queries
/// and cross-camera galleries. Throws if cameras < 2.
DatasetManifest generate_dataset(const SynthConfig& config);

/// Scans a directory of `<id>_c<camera>_<seq>.<ext>` images with sibling
/// `<stem>_rot<k>.png` structure maps. Unparsable names become warnings;
/// records missing any rotation map are kept but flagged. Throws on an empty
/// directory.
DatasetManifest ingest_real(const std::string& dir);

/// Renders a synthetic manifest to PNG files plus a line-delimited JSON
/// manifest (path, id, camera, yaw_step, split per line). Structure maps for
/// all 8 rotations are written alongside each train image.
void export_dataset(const DatasetManifest& m, const std::string& dir);

/// Loads a manifest written by export_dataset (or hand-authored in the same
/// format) with image paths resolved relative to its directory.
DatasetManifest load_manifest(const std::string& manifest_path);

/// Materializes records as tensors with an in-memory cache.
class DataStore {
public:
    explicit DataStore(const DatasetManifest& m);

    const DatasetManifest& manifest() const { return *m_; }
    int height() const { return m_->height; }
    int width() const { return m_->width; }

    /// [3 x H x W] image for record `rec`.
    const Tensor& image(int rec);
    /// [1 x H x W] structure map for rotation step k (k = 0 is the record's own pose).
    const Tensor& structure(int rec, int k);

private:
    const DatasetManifest* m_;
    std::vector<Tensor> images_;
    std::vector<std::array<Tensor, kYawSteps>> structures_;
    std::vector<bool> image_loaded_;
    std::vector<std::array<bool, kYawSteps>> structure_loaded_;
};

}  // namespace gcl::synth
