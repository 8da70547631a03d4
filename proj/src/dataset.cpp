#include "unimat/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "unimat/formula.hpp"

namespace unimat {

namespace {

constexpr int axis_perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                  {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};

// Cell angle separating axes i and j: named by the axis absent from the pair.
double angle_between(const unit_cell& c, int i, int j) {
    switch (3 - i - j) {
        case 0: return c.alpha;
        case 1: return c.beta;
        default: return c.gamma;
    }
}

} // namespace

std::vector<structure_record> generate_perovskites(const perovskite_spec& spec, int n,
                                                   std::uint64_t seed) {
    if (n < 1) throw empty_input("generate_perovskites: n must be >= 1");
    if (spec.a_site.empty() || spec.b_site.empty() || spec.x_site.empty())
        throw config_error("perovskite spec needs candidate elements for every site");
    auto [lo, hi] = spec.lattice_range;
    if (!(lo > 0.0) || hi < lo) throw config_error("invalid lattice constant range");
    if (spec.jitter_sigma < 0.0) throw config_error("jitter sigma must be non-negative");

    constexpr double face[3][3] = {{0.5, 0.5, 0.0}, {0.5, 0.0, 0.5}, {0.0, 0.5, 0.5}};
    std::vector<structure_record> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        rng r(derive_seed(seed, {hash_tag("perovskite"), static_cast<std::uint64_t>(i)}));
        double a = r.uniform(lo, hi);
        int za = spec.a_site[r.uniform_int(spec.a_site.size())];
        int zb = spec.b_site[r.uniform_int(spec.b_site.size())];
        int zx = spec.x_site[r.uniform_int(spec.x_site.size())];

        crystal c;
        c.cell = {a, a, a, 90.0, 90.0, 90.0};
        c.sites.push_back({za, {0.0, 0.0, 0.0}});
        c.sites.push_back({zb, {0.5, 0.5, 0.5}});
        for (const auto& f : face) c.sites.push_back({zx, {f[0], f[1], f[2]}});
        if (spec.jitter_sigma > 0.0)
            for (auto& s : c.sites)
                for (int k = 0; k < 3; ++k)
                    s.frac[k] = wrap_frac(s.frac[k] + r.gaussian() * spec.jitter_sigma / a);

        structure_record rec;
        char buf[32];
        std::snprintf(buf, sizeof buf, "perov-%06d", i);
        rec.id = buf;
        rec.tags = {{"family", "perovskite"}, {"formula", format_formula(composition_of(c))}};
        rec.structure = std::move(c);
        out.push_back(std::move(rec));
    }
    return out;
}

unimat_tensor shuffle_slots(const unimat_tensor& t, rng& r) {
    unimat_tensor out = t;
    int L = t.shape.L, H = t.shape.H(), W = t.shape.W();
    std::vector<int> occ;
    std::vector<std::array<double, 3>> triples;
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            occ.clear();
            for (int l = 0; l < L; ++l)
                if (!t.slot_is_null(l, h, w)) occ.push_back(l);
            if (occ.size() < 2) continue;
            triples.clear();
            for (int l : occ) triples.push_back({t(l, h, w, 0), t(l, h, w, 1), t(l, h, w, 2)});
            for (std::size_t i = triples.size() - 1; i > 0; --i)
                std::swap(triples[i], triples[r.uniform_int(i + 1)]);
            for (std::size_t k = 0; k < occ.size(); ++k)
                for (int c = 0; c < 3; ++c) out(occ[k], h, w, c) = triples[k][c];
        }
    return out;
}

int rotation_op_count(const unimat_tensor& t) {
    for (int k = 3; k < 6; ++k)
        if (std::abs(t.cell_params[k] - 90.0) > 1e-9) return 6;
    return 48;
}

unimat_tensor rotate_tensor(const unimat_tensor& t, int op) {
    if (op < 0 || op >= 48) throw index_error("rotation op out of range");
    const int* p = axis_perms[op / 8];
    int sign_bits = op % 8;
    double sign[3];
    for (int k = 0; k < 3; ++k) sign[k] = (sign_bits >> k) & 1 ? -1.0 : 1.0;

    unimat_tensor out = t;
    unit_cell cell = unit_cell::from_params(t.cell_params);
    double lengths[3] = {cell.a, cell.b, cell.c};
    out.cell_params = {lengths[p[0]],
                       lengths[p[1]],
                       lengths[p[2]],
                       angle_between(cell, p[1], p[2]),
                       angle_between(cell, p[0], p[2]),
                       angle_between(cell, p[0], p[1])};

    int L = t.shape.L, H = t.shape.H(), W = t.shape.W();
    for (int l = 0; l < L; ++l)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                if (t.slot_is_null(l, h, w)) continue;
                double f[3] = {t(l, h, w, 0), t(l, h, w, 1), t(l, h, w, 2)};
                for (int k = 0; k < 3; ++k) out(l, h, w, k) = wrap_frac(sign[k] * f[p[k]]);
            }
    return out;
}

unimat_tensor translate_tensor(const unimat_tensor& t, const std::array<double, 3>& offset) {
    unimat_tensor out = t;
    int L = t.shape.L, H = t.shape.H(), W = t.shape.W();
    for (int l = 0; l < L; ++l)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                if (t.slot_is_null(l, h, w)) continue;
                for (int k = 0; k < 3; ++k)
                    out(l, h, w, k) = wrap_frac(t(l, h, w, k) + offset[k]);
            }
    return out;
}

unimat_tensor augment(const unimat_tensor& t, const augment_config& cfg) {
    unimat_tensor out = t;
    rng r(derive_seed(cfg.seed, {hash_tag("augment")}));
    if (cfg.shuffle) out = shuffle_slots(out, r);
    if (cfg.rotate) out = rotate_tensor(out, static_cast<int>(r.uniform_int(
                                                 static_cast<std::uint64_t>(rotation_op_count(out)))));
    if (cfg.translate) out = translate_tensor(out, {r.uniform(), r.uniform(), r.uniform()});
    return out;
}

batch_stream::batch_stream(std::vector<structure_record> records, const system_shape& shape,
                           int batch_size, const augment_config& aug,
                           std::optional<composition_cond::kind> cond_mode, std::uint64_t seed,
                           const std::array<double, 6>& cell_scale)
    : records_(std::move(records)),
      shape_(shape),
      batch_size_(batch_size),
      aug_(aug),
      cond_mode_(cond_mode),
      seed_(seed),
      cell_scale_(cell_scale),
      dim_(material_dim(shape)) {
    if (records_.empty()) throw empty_input("batch_stream: no records");
    if (batch_size_ < 1) throw config_error("batch size must be >= 1");
    reshuffle();
}

int batch_stream::batches_per_epoch() const {
    int nrec = static_cast<int>(records_.size());
    return (nrec + batch_size_ - 1) / batch_size_;
}

void batch_stream::reshuffle() {
    order_.resize(records_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    rng r(derive_seed(seed_, {hash_tag("epoch"), state_.epoch}));
    for (std::size_t i = order_.size() - 1; i > 0; --i)
        std::swap(order_[i], order_[r.uniform_int(i + 1)]);
}

void batch_stream::restore(const batch_stream_state& s) {
    int nrec = static_cast<int>(records_.size());
    if (s.pos < 0 || s.pos >= nrec || s.pos % batch_size_ != 0)
        throw checkpoint_error("batch stream position does not align with the batch grid");
    state_ = s;
    reshuffle();
}

training_batch batch_stream::next() {
    int nrec = static_cast<int>(records_.size());
    int count = std::min(batch_size_, nrec - state_.pos);

    training_batch b;
    b.n = count;
    b.dim = dim_;
    b.x.resize(static_cast<std::size_t>(count) * dim_);
    b.ids.reserve(count);
    if (cond_mode_) b.conds.reserve(count);

    for (int j = 0; j < count; ++j) {
        int epoch_slot = state_.pos + j;
        const structure_record& rec = records_[order_[epoch_slot]];
        unimat_tensor enc;
        try {
            enc = encode(rec.structure, shape_);
        } catch (const capacity_exceeded& e) {
            throw capacity_exceeded(std::string(e.what()) + " [record " + rec.id + "]");
        }
        augment_config key = aug_;
        key.seed = derive_seed(seed_, {hash_tag("augment"), aug_.seed, state_.epoch,
                                       static_cast<std::uint64_t>(epoch_slot)});
        unimat_tensor aug = augment(enc, key);
        std::vector<double> row = pack_material(aug, cell_scale_);
        std::copy(row.begin(), row.end(), b.x.begin() + static_cast<std::size_t>(j) * dim_);
        b.ids.push_back(rec.id);
        if (cond_mode_) b.conds.push_back(make_condition(rec.structure, *cond_mode_, shape_));
    }

    state_.pos += count;
    if (state_.pos >= nrec) {
        state_.pos = 0;
        ++state_.epoch;
        reshuffle();
    }
    return b;
}

} // namespace unimat
