#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unimat/corpus.hpp"
#include "unimat/diffusion.hpp"
#include "unimat/repr.hpp"
#include "unimat/rng.hpp"

namespace unimat {

// Synthetic cubic ABX3 corpus: ideal perovskite geometry with per-structure
// lattice constants and Gaussian coordinate jitter.
struct perovskite_spec {
    std::vector<int> a_site, b_site, x_site;            // candidate atomic numbers
    std::pair<double, double> lattice_range{3.8, 4.4};  // Angstrom
    double jitter_sigma = 0.02;                         // Angstrom
};

std::vector<structure_record> generate_perovskites(const perovskite_spec& spec, int n,
                                                   std::uint64_t seed);

struct augment_config {
    bool shuffle = true;
    bool rotate = true;
    bool translate = true;
    std::uint64_t seed = 0;
};

// Deterministic primitives augment() composes; exposed for direct testing.
// Null slots pass through every one of them unchanged.
unimat_tensor shuffle_slots(const unimat_tensor& t, rng& r);
// 48 signed axis permutations when every cell angle is 90 degrees, else the
// 6 unsigned ones (sign flips would bend non-right angles).
int rotation_op_count(const unimat_tensor& t);
// op encodes permutation*8 + sign bits; coordinates map x -> P.x mod 1 and the
// cell parameters are reindexed to match.
unimat_tensor rotate_tensor(const unimat_tensor& t, int op);
unimat_tensor translate_tensor(const unimat_tensor& t, const std::array<double, 3>& offset);

unimat_tensor augment(const unimat_tensor& t, const augment_config& cfg);

struct training_batch {
    int n = 0;
    int dim = 0;
    std::vector<double> x;                // n rows of packed material vectors
    std::vector<composition_cond> conds;  // one per row; empty when unconditional
    std::vector<std::string> ids;
};

struct batch_stream_state {
    std::uint64_t epoch = 0;
    int pos = 0;  // records consumed within the epoch
};

// Epoch-shuffled batches, reproducible given the seed: epoch order and each
// record's augmentation stream are keyed by (seed, epoch, position).
class batch_stream {
  public:
    batch_stream(std::vector<structure_record> records, const system_shape& shape, int batch_size,
                 const augment_config& aug, std::optional<composition_cond::kind> cond_mode,
                 std::uint64_t seed, const std::array<double, 6>& cell_scale);

    training_batch next();

    int batches_per_epoch() const;
    int record_count() const { return static_cast<int>(records_.size()); }
    int dim() const { return dim_; }
    const system_shape& shape() const { return shape_; }

    batch_stream_state state() const { return state_; }
    void restore(const batch_stream_state& s);

  private:
    void reshuffle();

    std::vector<structure_record> records_;
    system_shape shape_;
    int batch_size_;
    augment_config aug_;
    std::optional<composition_cond::kind> cond_mode_;
    std::uint64_t seed_;
    std::array<double, 6> cell_scale_;
    int dim_;
    batch_stream_state state_;
    std::vector<int> order_;
};

} // namespace unimat
