#include "saldiff/features.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "saldiff/io.hpp"

namespace saldiff {

namespace {

// Raw chunk count of the audio structural encoding; identity k pulses
// chunk k % kAudioChunks of each frame.
constexpr int kAudioChunks = 16;

constexpr uint64_t kVideoSalt = 0x76696465;
constexpr uint64_t kAudioSalt = 0x61756469;
constexpr uint64_t kTextSalt = 0x74657874;

Tensor random_projection(uint64_t seed, int in_dim, int out_dim) {
    SeededRng rng(seed);
    Tensor p({in_dim, out_dim});
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (auto& v : p.data) v = rng.normal() * scale;
    return p;
}

}  // namespace

int samples_per_frame(int audio_rate_hz, int video_fps) {
    if (video_fps <= 0) throw ArgumentError("samples_per_frame: video fps must be positive");
    if (audio_rate_hz <= 0) throw ArgumentError("samples_per_frame: audio rate must be positive");
    // Truncating division; callers zero-pad the waveform tail when the rate
    // is not an exact multiple of the frame rate.
    return audio_rate_hz / video_fps;
}

std::vector<Tensor> segment_audio(const AudioWaveform& a, int video_fps, int num_frames) {
    if (a.samples.empty()) throw ArgumentError("segment_audio: empty waveform");
    if (num_frames <= 0) throw ArgumentError("segment_audio: num_frames must be positive");
    const int n = samples_per_frame(a.sample_rate_hz, video_fps);
    if (n <= 0) throw ArgumentError("segment_audio: zero samples per frame");

    std::vector<double> window(static_cast<size_t>(n), 0.0);
    if (n > 1) {
        for (int k = 0; k < n; ++k)
            window[static_cast<size_t>(k)] =
                0.5 * (1.0 - std::cos(2.0 * M_PI * k / static_cast<double>(n - 1)));
    }

    std::vector<Tensor> segments;
    segments.reserve(static_cast<size_t>(num_frames));
    for (int f = 0; f < num_frames; ++f) {
        Tensor seg({n});
        for (int k = 0; k < n; ++k) {
            const size_t idx = static_cast<size_t>(f) * n + k;
            const double s = idx < a.samples.size() ? a.samples[idx] : 0.0;  // zero-pad tail
            seg.data[static_cast<size_t>(k)] = s * window[static_cast<size_t>(k)];
        }
        segments.push_back(std::move(seg));
    }
    return segments;
}

VisualFeatures synth_encode_video(const SceneDescriptor& scene, const FeatureConfig& cfg) {
    // Structural encoding per (t, cell): presence, identity one-hot,
    // sub-cell offsets of the object center, and a temporal tag.
    const int raw_dim = 1 + cfg.num_identities + 2 + 1;
    Tensor proj = random_projection(cfg.seed ^ kVideoSalt, raw_dim, cfg.c_v);

    Tensor grid({cfg.t_v, cfg.h_v, cfg.w_v, cfg.c_v});
    std::vector<double> raw(static_cast<size_t>(raw_dim), 0.0);
    for (int t = 0; t < cfg.t_v; ++t) {
        const double time_tag = cfg.t_v > 1 ? static_cast<double>(t) / (cfg.t_v - 1) : 0.0;
        for (int r = 0; r < cfg.h_v; ++r) {
            for (int c = 0; c < cfg.w_v; ++c) {
                std::fill(raw.begin(), raw.end(), 0.0);
                for (const SceneObject& ob : scene.objects) {
                    if (ob.cell_row != r || ob.cell_col != c) continue;
                    if (ob.identity < 0 || ob.identity >= cfg.num_identities)
                        throw ArgumentError("synth_encode_video: identity out of range");
                    raw[0] = 1.0;
                    raw[static_cast<size_t>(1 + ob.identity)] = 1.0;
                    raw[static_cast<size_t>(1 + cfg.num_identities)] = ob.offset_row;
                    raw[static_cast<size_t>(1 + cfg.num_identities + 1)] = ob.offset_col;
                }
                raw[static_cast<size_t>(raw_dim - 1)] = time_tag;
                double* out = grid.data.data() +
                              ((static_cast<int64_t>(t) * cfg.h_v + r) * cfg.w_v + c) * cfg.c_v;
                for (int j = 0; j < cfg.c_v; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < raw_dim; ++i)
                        acc += raw[static_cast<size_t>(i)] * proj.at(i, j);
                    out[j] = acc;
                }
            }
        }
    }
    return VisualFeatures{std::move(grid)};
}

AudioFeatures synth_encode_audio(const std::vector<Tensor>& segments, const FeatureConfig& cfg) {
    if (segments.empty()) throw ArgumentError("synth_encode_audio: no segments");
    Tensor proj = random_projection(cfg.seed ^ kAudioSalt, kAudioChunks, cfg.c_a);

    Tensor tokens({static_cast<int>(segments.size()), cfg.c_a});
    for (size_t s = 0; s < segments.size(); ++s) {
        const Tensor& seg = segments[s];
        const int n = static_cast<int>(seg.numel());
        double chunk_mean[kAudioChunks] = {};
        for (int k = 0; k < kAudioChunks; ++k) {
            const int lo = static_cast<int>(static_cast<int64_t>(k) * n / kAudioChunks);
            const int hi = static_cast<int>(static_cast<int64_t>(k + 1) * n / kAudioChunks);
            double acc = 0.0;
            for (int i = lo; i < hi; ++i) acc += seg.data[static_cast<size_t>(i)];
            chunk_mean[k] = hi > lo ? acc / (hi - lo) : 0.0;
        }
        for (int j = 0; j < cfg.c_a; ++j) {
            double acc = 0.0;
            for (int k = 0; k < kAudioChunks; ++k) acc += chunk_mean[k] * proj.at(k, j);
            tokens.at(static_cast<int>(s), j) = acc;
        }
    }
    return AudioFeatures{std::move(tokens)};
}

TextFeatures synth_encode_text(const std::vector<int>& token_ids, const FeatureConfig& cfg) {
    if (token_ids.empty()) throw ArgumentError("synth_encode_text: empty token sequence");
    const int vocab = cfg.text_vocab();
    SeededRng table_rng(cfg.seed ^ kTextSalt);
    Tensor table = table_rng.normal_tensor({vocab, cfg.c_t});

    Tensor tokens({static_cast<int>(token_ids.size()), cfg.c_t});
    for (size_t i = 0; i < token_ids.size(); ++i) {
        const int id = token_ids[i];
        if (id < 0 || id >= vocab)
            throw VocabError("synth_encode_text: unknown token id " + std::to_string(id));
        for (int j = 0; j < cfg.c_t; ++j) tokens.at(static_cast<int>(i), j) = table.at(id, j);
    }
    return TextFeatures{std::move(tokens)};
}

DatasetSample generate_blob_world(SeededRng& rng, const BlobWorldConfig& cfg) {
    const int cells = cfg.feat.h_v * cfg.feat.w_v;
    if (cfg.num_objects < 2 || cfg.num_objects > 5)
        throw ArgumentError("generate_blob_world: object count must be in [2,5]");
    if (cfg.num_objects > cells)
        throw ArgumentError("generate_blob_world: more objects than grid cells");
    if (cfg.num_objects > cfg.feat.num_identities)
        throw ArgumentError("generate_blob_world: more objects than identities");
    if (cfg.sigma <= 0.0) throw ArgumentError("generate_blob_world: sigma must be positive");

    // Distinct cells and distinct identities via partial Fisher-Yates.
    std::vector<int> cell_ids(static_cast<size_t>(cells));
    for (int i = 0; i < cells; ++i) cell_ids[static_cast<size_t>(i)] = i;
    std::vector<int> idents(static_cast<size_t>(cfg.feat.num_identities));
    for (int i = 0; i < cfg.feat.num_identities; ++i) idents[static_cast<size_t>(i)] = i;
    for (int i = 0; i < cfg.num_objects; ++i) {
        std::swap(cell_ids[static_cast<size_t>(i)],
                  cell_ids[static_cast<size_t>(rng.uniform_int(i, cells - 1))]);
        std::swap(idents[static_cast<size_t>(i)],
                  idents[static_cast<size_t>(rng.uniform_int(i, cfg.feat.num_identities - 1))]);
    }

    const double cell_h = static_cast<double>(cfg.map_h) / cfg.feat.h_v;
    const double cell_w = static_cast<double>(cfg.map_w) / cfg.feat.w_v;

    SceneDescriptor scene;
    for (int i = 0; i < cfg.num_objects; ++i) {
        SceneObject ob;
        ob.identity = idents[static_cast<size_t>(i)];
        ob.cell_row = cell_ids[static_cast<size_t>(i)] / cfg.feat.w_v;
        ob.cell_col = cell_ids[static_cast<size_t>(i)] % cfg.feat.w_v;
        // Continuous center inside the cell; offsets stored in cell units.
        ob.offset_row = (rng.uniform() - 0.5) * 0.8;
        ob.offset_col = (rng.uniform() - 0.5) * 0.8;
        scene.objects.push_back(ob);
    }
    const int salient = rng.uniform_int(0, cfg.num_objects - 1);
    const SceneObject& sal = scene.objects[static_cast<size_t>(salient)];
    const double sal_row = (sal.cell_row + 0.5 + sal.offset_row) * cell_h - 0.5;
    const double sal_col = (sal.cell_col + 0.5 + sal.offset_col) * cell_w - 0.5;

    // Ground truth: isotropic Gaussian around the salient center,
    // peak-normalized to 1.
    Tensor gt({cfg.map_h, cfg.map_w});
    double peak = 0.0;
    for (int r = 0; r < cfg.map_h; ++r)
        for (int c = 0; c < cfg.map_w; ++c) {
            const double dr = r - sal_row, dc = c - sal_col;
            const double v = std::exp(-(dr * dr + dc * dc) / (2.0 * cfg.sigma * cfg.sigma));
            gt.at(r, c) = v;
            peak = std::max(peak, v);
        }
    for (auto& v : gt.data) v /= peak;

    std::vector<std::pair<int, int>> fixations;
    for (int i = 0; i < cfg.num_fixations; ++i) {
        int fr = static_cast<int>(std::lround(sal_row + cfg.sigma * rng.normal()));
        int fc = static_cast<int>(std::lround(sal_col + cfg.sigma * rng.normal()));
        fr = std::clamp(fr, 0, cfg.map_h - 1);
        fc = std::clamp(fc, 0, cfg.map_w - 1);
        fixations.emplace_back(fr, fc);
    }

    // Text: salient identity token, then its grid-cell token.
    const int cell_index = sal.cell_row * cfg.feat.w_v + sal.cell_col;
    TextFeatures text = synth_encode_text(
        {sal.identity, cfg.feat.num_identities + cell_index}, cfg.feat);

    // Audio: per frame, a unit pulse occupying the chunk slot indexed by the
    // salient identity.
    const int n = samples_per_frame(cfg.audio_rate_hz, cfg.video_fps);
    const int slot = sal.identity % kAudioChunks;
    AudioWaveform wave;
    wave.sample_rate_hz = cfg.audio_rate_hz;
    wave.samples.assign(static_cast<size_t>(cfg.feat.t_a) * n, 0.0);
    for (int f = 0; f < cfg.feat.t_a; ++f) {
        const int lo = static_cast<int>(static_cast<int64_t>(slot) * n / kAudioChunks);
        const int hi = static_cast<int>(static_cast<int64_t>(slot + 1) * n / kAudioChunks);
        for (int k = lo; k < hi; ++k) wave.samples[static_cast<size_t>(f) * n + k] = 1.0;
    }
    AudioFeatures audio = synth_encode_audio(segment_audio(wave, cfg.video_fps, cfg.feat.t_a),
                                             cfg.feat);

    VisualFeatures visual = synth_encode_video(scene, cfg.feat);

    DatasetSample s;
    s.visual = std::move(visual);
    s.audio = std::move(audio);
    s.text = std::move(text);
    s.gt_map = std::move(gt);
    s.fixations = std::move(fixations);
    return s;
}

void write_record(const std::string& path, const DatasetSample& s) {
    io::ByteWriter w;
    w.bytes("TAVS", 4);
    w.u16(1);
    w.f32_array(s.visual.grid.data);
    w.f32_array(s.audio.tokens.data);
    w.f32_array(s.text.tokens.data);
    w.f32_array(s.gt_map.data);
    w.u32(static_cast<uint32_t>(s.fixations.size()));
    for (auto [r, c] : s.fixations) {
        w.u32(static_cast<uint32_t>(r));
        w.u32(static_cast<uint32_t>(c));
    }
    io::write_file(path, w.data());
}

DatasetSample read_record(const std::string& path, const BlobWorldConfig& cfg) {
    io::ByteReader r(io::read_file(path));
    char magic[4];
    magic[0] = static_cast<char>(r.u8());
    magic[1] = static_cast<char>(r.u8());
    magic[2] = static_cast<char>(r.u8());
    magic[3] = static_cast<char>(r.u8());
    if (std::string(magic, 4) != "TAVS") throw DataError("bad record magic in " + path);
    if (r.u16() != 1) throw DataError("unsupported record version in " + path);

    const FeatureConfig& f = cfg.feat;
    DatasetSample s;
    auto vis = r.f32_array();
    if (static_cast<int64_t>(vis.size()) !=
        static_cast<int64_t>(f.t_v) * f.h_v * f.w_v * f.c_v)
        throw DataError("visual feature size mismatch in " + path);
    s.visual.grid = Tensor({f.t_v, f.h_v, f.w_v, f.c_v}, std::move(vis));

    auto aud = r.f32_array();
    if (static_cast<int64_t>(aud.size()) != static_cast<int64_t>(f.t_a) * f.c_a)
        throw DataError("audio feature size mismatch in " + path);
    s.audio.tokens = Tensor({f.t_a, f.c_a}, std::move(aud));

    auto txt = r.f32_array();
    if (txt.empty() || txt.size() % static_cast<size_t>(f.c_t) != 0)
        throw DataError("text feature size mismatch in " + path);
    s.text.tokens = Tensor({static_cast<int>(txt.size()) / f.c_t, f.c_t}, std::move(txt));

    auto gt = r.f32_array();
    if (static_cast<int64_t>(gt.size()) != static_cast<int64_t>(cfg.map_h) * cfg.map_w)
        throw DataError("gt map size mismatch in " + path);
    s.gt_map = Tensor({cfg.map_h, cfg.map_w}, std::move(gt));

    const uint32_t nfix = r.u32();
    if (nfix == 0) throw DataError("record has no fixations: " + path);
    for (uint32_t i = 0; i < nfix; ++i) {
        const int fr = static_cast<int>(r.u32());
        const int fc = static_cast<int>(r.u32());
        if (fr < 0 || fr >= cfg.map_h || fc < 0 || fc >= cfg.map_w)
            throw DataError("fixation out of bounds in " + path);
        s.fixations.emplace_back(fr, fc);
    }
    return s;
}

std::vector<std::string> read_manifest(const std::string& dir) {
    std::istringstream in(io::read_text_file(dir + "/manifest.txt"));
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) names.push_back(line);
    }
    if (names.empty()) throw DataError("empty manifest in " + dir);
    return names;
}

void write_manifest(const std::string& dir, const std::vector<std::string>& names) {
    std::string text;
    for (const auto& n : names) {
        text += n;
        text += '\n';
    }
    io::write_text_file(dir + "/manifest.txt", text);
}

std::vector<DatasetSample> load_split(const std::string& dir, const BlobWorldConfig& cfg) {
    std::vector<DatasetSample> samples;
    for (const auto& name : read_manifest(dir)) samples.push_back(read_record(dir + "/" + name, cfg));
    return samples;
}

}  // namespace saldiff
