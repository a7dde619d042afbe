#pragma once

#include <string>
#include <utility>
#include <vector>

#include "saldiff/rng.hpp"
#include "saldiff/tensor.hpp"

namespace saldiff {

struct AudioWaveform {
    std::vector<double> samples;  // in [-1, 1]
    int sample_rate_hz = 0;
};

struct VisualFeatures {
    Tensor grid;  // [t_v, h_v, w_v, c_v]
};

struct AudioFeatures {
    Tensor tokens;  // [t_a, c_a]
};

struct TextFeatures {
    Tensor tokens;  // [n, c_t]
};

struct DatasetSample {
    VisualFeatures visual;
    AudioFeatures audio;
    TextFeatures text;
    Tensor gt_map;                              // [H, W], values in [0,1]
    std::vector<std::pair<int, int>> fixations;  // (row, col)
};

// Output dimensions of the synthetic encoders plus the projection seed.
struct FeatureConfig {
    int t_v = 4, h_v = 6, w_v = 10, c_v = 32;
    int t_a = 4, c_a = 32;
    int c_t = 32;
    int num_identities = 8;
    uint64_t seed = 1234;

    int text_vocab() const { return num_identities + h_v * w_v; }
};

// One rendered object. Identity is what text/audio refer to; the continuous
// sub-cell position is only observable through the visual features.
struct SceneObject {
    int identity = 0;
    int cell_row = 0, cell_col = 0;
    double offset_row = 0.0, offset_col = 0.0;  // cell units, in (-0.5, 0.5)
};

struct SceneDescriptor {
    std::vector<SceneObject> objects;
};

struct BlobWorldConfig {
    int map_h = 24, map_w = 40;
    int num_objects = 3;  // K, valid range [2,5]
    double sigma = 1.5;
    int num_fixations = 10;
    int audio_rate_hz = 1600;
    int video_fps = 25;  // with rate 1600 -> 64 samples per frame
    FeatureConfig feat;
};

// N = audio rate / video fps, truncated toward zero.
int samples_per_frame(int audio_rate_hz, int video_fps);

// Splits the waveform into num_frames segments of N samples (zero-padded
// tail) and applies a Hanning window w[k] = 0.5*(1 - cos(2*pi*k/(N-1))).
std::vector<Tensor> segment_audio(const AudioWaveform& a, int video_fps, int num_frames);

// Deterministic stand-ins for the pretrained backbones: a hand-coded
// structural encoding followed by a fixed random projection.
VisualFeatures synth_encode_video(const SceneDescriptor& scene, const FeatureConfig& cfg);
AudioFeatures synth_encode_audio(const std::vector<Tensor>& segments, const FeatureConfig& cfg);
TextFeatures synth_encode_text(const std::vector<int>& token_ids, const FeatureConfig& cfg);

// Synthesizes one multimodal sample: K objects on the feature grid, one
// salient; text names the salient identity and its grid cell; the audio
// waveform pulses in a chunk slot indexed by the identity.
DatasetSample generate_blob_world(SeededRng& rng, const BlobWorldConfig& cfg);

// On-disk record: magic "TAVS", version u16, count-prefixed f32 arrays for
// visual/audio/text/gt_map, then fixations as count-prefixed u32 pairs.
void write_record(const std::string& path, const DatasetSample& s);
DatasetSample read_record(const std::string& path, const BlobWorldConfig& cfg);

std::vector<std::string> read_manifest(const std::string& dir);
void write_manifest(const std::string& dir, const std::vector<std::string>& names);
std::vector<DatasetSample> load_split(const std::string& dir, const BlobWorldConfig& cfg);

}  // namespace saldiff
