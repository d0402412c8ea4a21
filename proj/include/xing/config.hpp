#pragma once

// Flat key=value run configuration with '#' comments. Every run writes the
// effective config back out, and checkpoints embed it verbatim.

#include <cstdint>
#include <stdexcept>
#include <string>

#include "xing/nets.hpp"

namespace xing {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    Variant variant = Variant::FULL;
    int t_blocks = 9;    // T
    int n_images = 10;   // N
    int channels = 64;   // c
    int image_h = 64;    // H
    int image_w = 32;    // W
    double lambda_gan = 5.0;
    double lambda_l1 = 50.0;
    double lambda_p = 50.0;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    long iterations = 90000;
    int batch_size = 4;
    std::uint64_t master_seed = 42;
    long eval_every = 500;
    long checkpoint_every = 500;
    int eval_samples = 40;   // held-out samples per evaluation
    int train_pairs = 20;    // pairs per training identity in the manifest
    double sigma = 1.5;      // heatmap Gaussian width, px
    bool gan_sum = false;    // gan_combine: false = average, true = sum
    long iteration = 0;      // resume counter; checkpoints write it back

    void validate() const;
};

TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::string& path);

// Canonical text form: every key on its own line, fixed order.
std::string serialize_config(const TrainConfig& cfg);

}  // namespace xing
