#include "gcl/synth/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <stdexcept>

#include "gcl/core/rng.hpp"
#include "gcl/synth/image_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gcl::synth {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

PoseSpec make_pose(int dataset_seed, int identity, int camera, int yaw) {
    const uint64_t key = splitmix64((static_cast<uint64_t>(dataset_seed) << 40) ^
                                    (static_cast<uint64_t>(identity) << 16) ^
                                    (static_cast<uint64_t>(camera) << 8) ^ static_cast<uint64_t>(yaw));
    Rng rng(key);
    PoseSpec pose;
    pose.yaw_step = yaw;
    pose.camera_id = camera;
    pose.limb_phase = rng.uniform(0.0, 2.0 * M_PI);
    pose.dx = rng.uniform(-0.1, 0.1);
    pose.dy = rng.uniform(-0.1, 0.1);
    return pose;
}

std::string record_stem(const Record& r, int seq) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d_c%d_%04d", r.identity, r.camera, seq);
    return buf;
}

}  // namespace

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::query: return "query";
        default: return "gallery";
    }
}

Split split_from_name(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "query") return Split::query;
    if (s == "gallery") return Split::gallery;
    throw std::runtime_error("unknown split: " + s);
}

std::vector<int> DatasetManifest::split_indices(Split s) const {
    std::vector<int> idx;
    for (size_t i = 0; i < records.size(); ++i)
        if (records[i].split == s) idx.push_back(static_cast<int>(i));
    return idx;
}

DatasetManifest generate_dataset(const SynthConfig& config) {
    if (config.cameras < 2)
        throw std::runtime_error("generate_dataset: need >= 2 cameras for cross-camera evaluation");
    if (config.train_identities < 1 || config.test_identities < 1)
        throw std::runtime_error("generate_dataset: identity counts must be positive");

    DatasetManifest m;
    m.height = config.height;
    m.width = config.width;
    const int seed_base = config.seed * 1000;

    auto add_identity = [&](int id_seed, bool is_train) {
        const IdentitySpec ident = make_identity(id_seed);
        for (int cam = 0; cam < config.cameras; ++cam) {
            for (int yaw = 0; yaw < kYawSteps; ++yaw) {
                Record r;
                r.synthetic = true;
                r.identity = id_seed;
                r.camera = cam;
                r.ident = ident;
                r.pose = make_pose(config.seed, id_seed, cam, yaw);
                r.split = is_train ? Split::train : (cam == 0 ? Split::query : Split::gallery);
                m.records.push_back(std::move(r));
            }
        }
    };

    for (int i = 0; i < config.train_identities; ++i) add_identity(seed_base + i, true);
    for (int i = 0; i < config.test_identities; ++i)
        add_identity(seed_base + config.train_identities + i, false);
    return m;
}

DatasetManifest ingest_real(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("ingest: not a directory: " + dir);

    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());

    static const std::regex main_re(R"(^(\d+)_c(\d+)_([A-Za-z0-9]+)\.([A-Za-z0-9]+)$)");
    static const std::regex rot_re(R"(_rot[0-7]\.[A-Za-z0-9]+$)");
    static const std::regex img_re(R"(\.(png|PNG|jpg|JPG|jpeg|bmp)$)");

    DatasetManifest m;
    bool any_file = false;
    for (const auto& name : files) {
        if (!std::regex_search(name, img_re)) continue;  // manifests etc. are not records
        if (std::regex_search(name, rot_re)) continue;   // structure map, not an image record
        any_file = true;
        std::smatch match;
        if (!std::regex_match(name, match, main_re)) {
            m.warnings.push_back("unparsable filename: " + name);
            continue;
        }
        Record r;
        r.synthetic = false;
        r.identity = std::stoi(match[1]);
        r.camera = std::stoi(match[2]);
        r.pose.camera_id = r.camera;
        r.image_path = (fs::path(dir) / name).string();
        r.split = Split::train;
        const std::string stem = name.substr(0, name.rfind('.'));
        r.has_rotations = true;
        for (int k = 0; k < kYawSteps; ++k) {
            const fs::path p = fs::path(dir) / (stem + "_rot" + std::to_string(k) + ".png");
            if (fs::exists(p)) {
                r.rot_paths[static_cast<size_t>(k)] = p.string();
            } else {
                r.has_rotations = false;
            }
        }
        if (!r.has_rotations)
            m.warnings.push_back("missing rotation maps: " + name + " (excluded from generation)");
        m.records.push_back(std::move(r));
    }

    if (!any_file) throw std::runtime_error("ingest: no files in " + dir);
    if (m.records.empty()) throw std::runtime_error("ingest: no usable records in " + dir);

    // image size from the first readable record
    for (const auto& r : m.records) {
        try {
            const Tensor img = read_png_rgb(r.image_path);
            m.height = img.shape(1);
            m.width = img.shape(2);
            break;
        } catch (const std::exception& e) {
            m.warnings.push_back(std::string("unreadable image: ") + r.image_path);
        }
    }
    return m;
}

void export_dataset(const DatasetManifest& m, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream mf(fs::path(dir) / "manifest.jsonl");
    if (!mf) throw std::runtime_error("cannot write manifest in " + dir);

    std::vector<int> seq_counter;
    for (size_t i = 0; i < m.records.size(); ++i) {
        const Record& r = m.records[i];
        if (!r.synthetic) throw std::runtime_error("export_dataset expects a synthetic manifest");
        const std::string stem = record_stem(r, r.pose.yaw_step);
        const std::string img_name = stem + ".png";
        write_png_rgb((fs::path(dir) / img_name).string(), render_person(r.ident, r.pose, m.height, m.width));
        for (int k = 0; k < kYawSteps; ++k) {
            const StructureMap sm = project_body(r.ident.shape, r.pose.rotated(k), m.height, m.width);
            write_png_gray((fs::path(dir) / (stem + "_rot" + std::to_string(k) + ".png")).string(),
                           sm.depth);
        }
        json line = {{"path", img_name},
                     {"id", r.identity},
                     {"camera", r.camera},
                     {"yaw", r.pose.yaw_step},
                     {"split", split_name(r.split)}};
        mf << line.dump() << "\n";
    }
    (void)seq_counter;
}

DatasetManifest load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    DatasetManifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        Record r;
        r.synthetic = false;
        r.identity = j.at("id").get<int>();
        r.camera = j.at("camera").get<int>();
        r.pose.yaw_step = j.value("yaw", 0);
        r.pose.camera_id = r.camera;
        r.image_path = (base / j.at("path").get<std::string>()).string();
        r.split = split_from_name(j.at("split").get<std::string>());
        const std::string full = j.at("path").get<std::string>();
        const std::string stem = full.substr(0, full.rfind('.'));
        r.has_rotations = true;
        for (int k = 0; k < kYawSteps; ++k) {
            const fs::path p = base / (stem + "_rot" + std::to_string(k) + ".png");
            if (fs::exists(p)) {
                r.rot_paths[static_cast<size_t>(k)] = p.string();
            } else {
                r.has_rotations = false;
            }
        }
        m.records.push_back(std::move(r));
    }
    if (m.records.empty()) throw std::runtime_error("empty manifest: " + manifest_path);
    const Tensor first = read_png_rgb(m.records.front().image_path);
    m.height = first.shape(1);
    m.width = first.shape(2);
    return m;
}

DataStore::DataStore(const DatasetManifest& m)
    : m_(&m),
      images_(m.records.size()),
      structures_(m.records.size()),
      image_loaded_(m.records.size(), false),
      structure_loaded_(m.records.size()) {
    for (auto& flags : structure_loaded_) flags.fill(false);
}

const Tensor& DataStore::image(int rec) {
    auto idx = static_cast<size_t>(rec);
    if (!image_loaded_[idx]) {
        const Record& r = m_->records[idx];
        if (r.synthetic) {
            images_[idx] = render_person(r.ident, r.pose, m_->height, m_->width);
        } else {
            Tensor img = read_png_rgb(r.image_path);
            if (img.shape(1) != m_->height || img.shape(2) != m_->width)
                throw std::runtime_error("image size mismatch: " + r.image_path);
            images_[idx] = std::move(img);
        }
        image_loaded_[idx] = true;
    }
    return images_[idx];
}

const Tensor& DataStore::structure(int rec, int k) {
    auto idx = static_cast<size_t>(rec);
    if (!structure_loaded_[idx][static_cast<size_t>(k)]) {
        const Record& r = m_->records[idx];
        if (r.synthetic) {
            structures_[idx][static_cast<size_t>(k)] =
                project_body(r.ident.shape, r.pose.rotated(k), m_->height, m_->width).depth;
        } else {
            if (!r.has_rotations)
                throw std::runtime_error("record lacks rotation maps: " + r.image_path);
            Tensor d = read_png_gray(r.rot_paths[static_cast<size_t>(k)]);
            if (d.shape(1) != m_->height || d.shape(2) != m_->width)
                throw std::runtime_error("structure size mismatch: " + r.rot_paths[static_cast<size_t>(k)]);
            structures_[idx][static_cast<size_t>(k)] = std::move(d);
        }
        structure_loaded_[idx][static_cast<size_t>(k)] = true;
    }
    return structures_[idx][static_cast<size_t>(k)];
}

}  // namespace gcl::synth
