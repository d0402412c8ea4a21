#pragma once

// Training driver: alternating discriminator/generator updates, periodic
// evaluation on held-out identities, and checkpointing. Everything a run
// produces is a pure function of the config, so a repeated run writes the
// same bytes.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "xing/checkpoint.hpp"
#include "xing/config.hpp"
#include "xing/metrics.hpp"
#include "xing/nets.hpp"
#include "xing/objectives.hpp"
#include "xing/optim.hpp"
#include "xing/synth.hpp"

namespace xing {

// Seed stream tags 1 and 2 belong to the dataset (identities and pairs).
inline constexpr std::uint64_t kStreamParams = 3;
inline constexpr std::uint64_t kStreamBatch = 4;

// The perceptual feature stack is frozen and shared by every run, so its
// seed is a fixed constant rather than part of the config.
inline constexpr std::uint64_t kExtractorSeed = 1905;

// Raised when a logged loss turns non-finite. Checkpoints already written
// stay on disk; the iteration is the one that produced the bad value.
struct TrainAbort : std::runtime_error {
    long iteration;
    explicit TrainAbort(long it)
        : std::runtime_error("training aborted: non-finite loss at iteration " +
                             std::to_string(it)),
          iteration(it) {}
};

// Parameters plus optimizer state. The config rides along so checkpoints
// are self-describing.
struct Model {
    TrainConfig cfg;
    GeneratorParams<float> g;
    DiscriminatorParams<float> d_i;  // conditioned on the source image
    DiscriminatorParams<float> d_p;  // conditioned on the target pose
    Adam adam_g, adam_di, adam_dp;

    static Model init(const TrainConfig& cfg);
    static Model from_checkpoint(const Checkpoint& ck);
    Checkpoint to_checkpoint() const;

    // Parameter handles in checkpoint order: generator, then both
    // discriminators, each in declaration order.
    std::vector<std::pair<std::string, Var<float>*>> named_params();
};

// Deterministic epoch-shuffled order over a manifest. Epoch e is permuted
// by its own derived seed, so any position in the stream can be restored
// without replaying draws.
class Sampler {
public:
    Sampler(std::uint64_t master_seed, std::vector<SampleRecord> records);

    const SampleRecord& next();
    void seek(long draws);  // position as if `draws` samples were consumed
    long size() const { return static_cast<long>(records_.size()); }

private:
    void reshuffle();

    std::uint64_t master_;
    std::vector<SampleRecord> records_;
    std::vector<std::size_t> perm_;
    long epoch_ = 0;
    long cursor_ = 0;
};

struct TrainResult {
    EvalReport first_eval, last_eval;
    std::string final_checkpoint;
    std::vector<std::string> checkpoint_paths;
    long iterations_run = 0;
};

// Runs model.cfg.iterations - model.cfg.iteration updates, writing
// train_log.csv, metrics.csv, config_used.txt and checkpoints into out_dir.
TrainResult train(Model& model, const std::string& out_dir);

// Held-out metrics for the current generator. Sample k pairs identity
// kEvalIdentityBegin + k % 40 with pair index k / 40. pass_through scores
// the target image against itself instead of running the generator, which
// pins the metric pipeline at its fixed point.
EvalReport evaluate(const GeneratorParams<float>& g, const TrainConfig& cfg,
                    bool pass_through = false);

// Writes source/target/generated PNG triples for the first `count` held-out
// samples into out_dir.
std::vector<std::string> generate_images(const GeneratorParams<float>& g,
                                         const TrainConfig& cfg, int count,
                                         const std::string& out_dir);

// Exports the co-attention state on one held-out sample: every attention
// map, every intermediate image, and a contact-sheet grid. Requires the
// FULL variant. Returns the file names written.
std::vector<std::string> dump_attention(const GeneratorParams<float>& g,
                                        const TrainConfig& cfg, int sample_index,
                                        const std::string& out_dir);

}  // namespace xing
