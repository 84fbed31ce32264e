#pragma once

#include "pimhe/bfv.hpp"
#include "pimhe/cim/hom.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pimhe::tasks {

struct TransferCost {
    std::uint64_t cycles = 100;
    std::uint64_t energy_milli = 100000;
};

inline TransferCost transfer_from_json(const nlohmann::json& j) {
    TransferCost t;
    t.cycles = j.value("cycles", std::uint64_t(100));
    t.energy_milli = static_cast<std::uint64_t>(j.value("energy", 100.0) * 1000.0 + 0.5);
    return t;
}

struct TaskConfig {
    ParamSet params = preset("desk-16");
    cim::BankGeometry geometry;
    cim::CostModel cost;
    TransferCost transfer;
    unsigned banks = 1;
    unsigned relin_w = 8;
    std::string seed = "task-seed";
    bool force_hommult = false;

    TaskConfig() {
        geometry.num_arrays = 16;
        geometry.rows_M = 96;
        geometry.data_rows_Mprime = 8;
        geometry.cols_N = 512;
        geometry.word_bits = 128;
    }

    /// Resize the working geometry so multiplication intermediates fit the
    /// parameter set exactly (word width for raw tensors, arrays for one
    /// ciphertext pair, scratch rows for the recursion).
    void fit_geometry() {
        unsigned l = 0;
        while ((1u << (l + 1)) <= params.n) ++l;
        const unsigned need = std::max(2 * (params.k + l + 1) + l + 2,
                                       params.k + (params.k - params.t_log2) + 1);
        geometry.word_bits = ((need + 63) / 64) * 64;
        geometry.cols_N = geometry.word_bits * 4;
        const std::uint32_t per_poly = (params.n + 3) / 4;
        geometry.num_arrays = std::max<std::uint32_t>(16, 2 * per_poly);
        geometry.rows_M = std::max<std::uint32_t>(96, geometry.rows_M);
        geometry.data_rows_Mprime = 8;
        geometry.validate();
    }

    void validate() const {
        if (banks < 1 || banks > 2) throw std::invalid_argument("task: bank count must be 1 or 2");
        ValidationResult v = pimhe::validate(params);
        if (!v.ok) throw std::invalid_argument("task: invalid parameters: " + v.violations.front());
    }
};

/// Aggregated cost of one task run. `cycles` is the parallel makespan (the
/// slowest bank, including its transfer stalls and the serial combine tail);
/// `energy` and the per-bank vectors are additive, so the conservation
/// identity "bank totals == sum of constituent traces + transfer charges"
/// stays checkable.
struct CostReport {
    std::string task;
    unsigned banks = 1;
    std::uint64_t homadd = 0, homsub = 0, hommult = 0;
    std::uint64_t cycles = 0;
    std::uint64_t energy_milli = 0;
    std::uint64_t transfers = 0;
    std::uint64_t transfer_cycles = 0;
    std::uint64_t transfer_energy_milli = 0;
    std::vector<std::uint64_t> bank_cycles;        // compute cycles per bank
    std::vector<std::uint64_t> bank_trace_cycles;  // identical by construction; kept for audits

    nlohmann::json to_json() const {
        return {{"task", task},
                {"banks", banks},
                {"ops", {{"homadd", homadd}, {"homsub", homsub}, {"hommult", hommult}}},
                {"cycles", cycles},
                {"energy", energy_milli / 1000.0},
                {"transfers", transfers},
                {"transfer_cycles", transfer_cycles},
                {"transfer_energy", transfer_energy_milli / 1000.0},
                {"bank_cycles", bank_cycles}};
    }
};

namespace detail {

/// Per-bank work tracker: owns one machine, accumulates trace totals and op
/// counts, and manages a small set of reusable resident slots.
class BankWorker {
public:
    BankWorker(const TaskConfig& cfg, const bfv::KeySet& ks, bool needs_mult) : cfg_(cfg) {
        machine_.emplace(cfg.params, cfg.geometry, cfg.cost, /*record=*/false);
        if (needs_mult) machine_->stage_rlk(ks);
    }

    std::uint32_t slot() { return machine_->reserve_slot(); }
    void stage(std::uint32_t idx, const bfv::Ciphertext& ct) { machine_->stage_ciphertext(idx, ct); }
    bfv::Ciphertext read(std::uint32_t idx) const { return machine_->read_ciphertext(idx); }

    void add(std::uint32_t a, std::uint32_t b, std::uint32_t d) {
        absorb(machine_->run_op(cim::HomOp::Add, a, b, d));
        ++homadd;
    }
    void sub(std::uint32_t a, std::uint32_t b, std::uint32_t d) {
        absorb(machine_->run_op(cim::HomOp::Sub, a, b, d));
        ++homsub;
    }
    void mult(std::uint32_t a, std::uint32_t b, std::uint32_t d) {
        absorb(machine_->run_op(cim::HomOp::Mult, a, b, d));
        ++hommult;
    }
    void scalar_mult(std::uint32_t src, const BigInt& g, std::uint32_t d) {
        absorb(machine_->run_scalar_mult(src, g, d));
    }

    std::uint64_t cycles = 0, energy_milli = 0;
    std::uint64_t homadd = 0, homsub = 0, hommult = 0;
    std::uint32_t capacity() const { return machine_->capacity(); }

private:
    void absorb(const cim::StepTrace& tr) {
        cycles += tr.total_cycles();
        energy_milli += tr.total_energy_milli();
    }
    TaskConfig cfg_;
    std::optional<cim::HomMachine> machine_;
};

inline bfv::Plaintext scalar_pt(const ParamSet& p, const BigInt& v) {
    bfv::Plaintext m{RingPoly(p.t_log2, p.n)};
    m.poly.coeffs[0] = reduce_centered(v, p.t_log2);
    return m;
}

/// Residency-model transfer charges: the first `capacity` input ciphertexts
/// per bank are resident, the rest are fetched from main memory.
inline void charge_transfers(CostReport& rep, const TaskConfig& cfg, const std::vector<std::uint64_t>& inputs_per_bank,
                             std::uint32_t capacity_per_bank, std::vector<std::uint64_t>& bank_cycles) {
    for (std::size_t b = 0; b < inputs_per_bank.size(); ++b) {
        const std::uint64_t over =
            inputs_per_bank[b] > capacity_per_bank ? inputs_per_bank[b] - capacity_per_bank : 0;
        rep.transfers += over;
        rep.transfer_cycles += over * cfg.transfer.cycles;
        rep.transfer_energy_milli += over * cfg.transfer.energy_milli;
        bank_cycles[b] += over * cfg.transfer.cycles;
    }
    rep.energy_milli += rep.transfer_energy_milli;
}

inline void finalize(CostReport& rep, std::vector<detail::BankWorker>& workers, const TaskConfig& cfg,
                     const std::vector<std::uint64_t>& inputs_per_bank, std::uint64_t serial_tail_cycles = 0) {
    rep.banks = cfg.banks;
    std::vector<std::uint64_t> bank_cycles;
    for (auto& w : workers) {
        rep.homadd += w.homadd;
        rep.homsub += w.homsub;
        rep.hommult += w.hommult;
        rep.energy_milli += w.energy_milli;
        bank_cycles.push_back(w.cycles);
        rep.bank_trace_cycles.push_back(w.cycles);
    }
    charge_transfers(rep, cfg, inputs_per_bank, workers[0].capacity(), bank_cycles);
    std::uint64_t makespan = 0;
    for (auto c : bank_cycles) makespan = std::max(makespan, c);
    rep.cycles = makespan + serial_tail_cycles;
    rep.bank_cycles = std::move(bank_cycles);
}

}  // namespace detail

/// Encrypted sum of the inputs (the mean's numerator): a fold of HomAdd with
/// the final division by N left to the client after decryption. With two
/// banks the halves fold in parallel and one partial crosses over for the
/// final addition.
inline std::pair<bfv::Ciphertext, CostReport> task_mean(const std::vector<long>& xs, const bfv::KeySet& ks,
                                                        const TaskConfig& cfg) {
    cfg.validate();
    if (xs.empty()) throw std::invalid_argument("mean: need at least one input");
    CostReport rep;
    rep.task = "mean";

    std::vector<bfv::Ciphertext> cts;
    for (std::size_t i = 0; i < xs.size(); ++i)
        cts.push_back(bfv::encrypt(detail::scalar_pt(cfg.params, xs[i]), ks, cfg.seed + "/mean/" + std::to_string(i)));

    const unsigned B = cfg.banks;
    std::vector<detail::BankWorker> workers;
    for (unsigned b = 0; b < B; ++b) workers.emplace_back(cfg, ks, false);

    std::vector<std::vector<bfv::Ciphertext>> parts(B);
    const std::size_t chunk = (cts.size() + B - 1) / B;
    for (std::size_t i = 0; i < cts.size(); ++i) parts[std::min<std::size_t>(i / chunk, B - 1)].push_back(cts[i]);

    std::vector<bfv::Ciphertext> partials(B);
    auto fold = [&](unsigned b) {
        auto& w = workers[b];
        if (parts[b].empty()) return;
        std::uint32_t acc = w.slot(), cur = w.slot(), nxt = w.slot();
        w.stage(acc, parts[b][0]);
        for (std::size_t i = 1; i < parts[b].size(); ++i) {
            w.stage(cur, parts[b][i]);
            w.add(acc, cur, nxt);
            std::swap(acc, nxt);
        }
        partials[b] = w.read(acc);
    };
    if (B == 1) {
        fold(0);
    } else {
        std::thread t1(fold, 0), t2(fold, 1);
        t1.join();
        t2.join();
    }

    bfv::Ciphertext result = partials[0];
    std::uint64_t tail = 0;
    if (B == 2 && !parts[1].empty()) {
        auto& w = workers[0];
        const std::uint64_t before = w.cycles;
        std::uint32_t x = w.slot(), y = w.slot(), d = w.slot();
        w.stage(x, partials[0]);
        w.stage(y, partials[1]);
        w.add(x, y, d);
        result = w.read(d);
        tail = w.cycles - before;
        w.cycles = before;  // the combine is the serial tail, not parallel work
    }

    std::vector<std::uint64_t> per_bank(B, 0);
    for (unsigned b = 0; b < B; ++b) per_bank[b] = parts[b].size();
    detail::finalize(rep, workers, cfg, per_bank, tail);
    return {result, rep};
}

/// Homomorphic variance numerator: sum_i (N*x_i - S)^2 with S = sum_j x_j.
/// N*x_i is built by repeated addition (N is public), squaring is one
/// HomMult per term; the client divides by N^3 after decryption.
inline std::pair<bfv::Ciphertext, CostReport> task_variance(const std::vector<long>& xs, const bfv::KeySet& ks,
                                                            const TaskConfig& cfg) {
    cfg.validate();
    if (xs.empty()) throw std::invalid_argument("variance: need at least one input");
    CostReport rep;
    rep.task = "variance";
    const std::size_t N = xs.size();

    std::vector<bfv::Ciphertext> cts;
    for (std::size_t i = 0; i < N; ++i)
        cts.push_back(
            bfv::encrypt(detail::scalar_pt(cfg.params, xs[i]), ks, cfg.seed + "/var/" + std::to_string(i)));

    const unsigned B = cfg.banks;
    std::vector<detail::BankWorker> workers;
    for (unsigned b = 0; b < B; ++b) workers.emplace_back(cfg, ks, true);

    // term ranges per bank
    std::vector<std::pair<std::size_t, std::size_t>> ranges(B);
    const std::size_t half = (N + B - 1) / B;
    ranges[0] = {0, std::min(N, half)};
    if (B == 2) ranges[1] = {std::min(N, half), N};

    std::vector<bfv::Ciphertext> partials(B);
    std::vector<char> has_partial(B, 0);
    auto worker_fn = [&](unsigned b) {
        auto& w = workers[b];
        auto [lo, hi] = ranges[b];
        if (lo >= hi) return;
        // S = sum_j x_j, computed locally
        std::uint32_t s_acc = w.slot(), cur = w.slot(), tmp = w.slot();
        w.stage(s_acc, cts[0]);
        for (std::size_t j = 1; j < N; ++j) {
            w.stage(cur, cts[j]);
            w.add(s_acc, cur, tmp);
            std::swap(s_acc, tmp);
        }
        std::uint32_t nacc = w.slot(), term = w.slot(), sq = w.slot(), res = w.slot(), res2 = w.slot();
        bool have_res = false;
        for (std::size_t i = lo; i < hi; ++i) {
            w.stage(cur, cts[i]);
            // N*x_i by repeated addition
            w.stage(nacc, cts[i]);
            for (std::size_t r = 1; r < N; ++r) {
                w.add(nacc, cur, tmp);
                std::swap(nacc, tmp);
            }
            w.sub(nacc, s_acc, term);
            if (!have_res) {
                w.mult(term, term, res);
                have_res = true;
            } else {
                w.mult(term, term, sq);
                w.add(res, sq, res2);
                std::swap(res, res2);
            }
        }
        partials[b] = w.read(res);
        has_partial[b] = 1;
    };
    if (B == 1) {
        worker_fn(0);
    } else {
        std::thread t1(worker_fn, 0), t2(worker_fn, 1);
        t1.join();
        t2.join();
    }

    bfv::Ciphertext result = partials[0];
    std::uint64_t tail = 0;
    if (B == 2 && has_partial[1]) {
        auto& w = workers[0];
        const std::uint64_t before = w.cycles;
        std::uint32_t x = w.slot(), y = w.slot(), d = w.slot();
        w.stage(x, partials[0]);
        w.stage(y, partials[1]);
        w.add(x, y, d);
        result = w.read(d);
        tail = w.cycles - before;
        w.cycles = before;
    }

    std::vector<std::uint64_t> per_bank(B, 0);
    per_bank[0] = N;  // every bank touches all inputs to form S
    if (B == 2) per_bank[1] = N;
    detail::finalize(rep, workers, cfg, per_bank, tail);
    return {result, rep};
}

struct LinregResult {
    std::vector<std::vector<bfv::Ciphertext>> xtx;  // D x D
    std::vector<bfv::Ciphertext> xt_t;              // D
    CostReport report;
};

/// Encrypted entries of X^T X and X^T t by inner products of HomMult/HomAdd.
/// Matrix inversion and transposition are left to the client.
inline LinregResult task_linreg(const std::vector<std::vector<long>>& X, const std::vector<long>& t,
                                const bfv::KeySet& ks, const TaskConfig& cfg) {
    cfg.validate();
    const std::size_t N = X.size();
    if (N == 0 || t.size() != N) throw std::invalid_argument("linreg: shape mismatch");
    const std::size_t D = X[0].size();

    LinregResult out;
    out.report.task = "linreg";

    std::vector<std::vector<bfv::Ciphertext>> cx(N, std::vector<bfv::Ciphertext>(D));
    std::vector<bfv::Ciphertext> ct(N);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < D; ++j)
            cx[i][j] = bfv::encrypt(detail::scalar_pt(cfg.params, X[i][j]), ks,
                                    cfg.seed + "/X/" + std::to_string(i) + "/" + std::to_string(j));
        ct[i] = bfv::encrypt(detail::scalar_pt(cfg.params, t[i]), ks, cfg.seed + "/t/" + std::to_string(i));
    }

    const unsigned B = cfg.banks;
    std::vector<detail::BankWorker> workers;
    for (unsigned b = 0; b < B; ++b) workers.emplace_back(cfg, ks, true);

    out.xtx.assign(D, std::vector<bfv::Ciphertext>(D));
    out.xt_t.assign(D, bfv::Ciphertext{});

    // work items: (r, c) entries of XtX, then c = D marks XtT entries
    struct Item {
        std::size_t r, c;
        bool xtt;
    };
    std::vector<Item> items;
    for (std::size_t r = 0; r < D; ++r)
        for (std::size_t c = 0; c < D; ++c) items.push_back({r, c, false});
    for (std::size_t r = 0; r < D; ++r) items.push_back({r, 0, true});

    auto worker_fn = [&](unsigned b) {
        auto& w = workers[b];
        std::uint32_t va = w.slot(), vb = w.slot(), prod = w.slot(), acc = w.slot(), tmp = w.slot();
        for (std::size_t it = b; it < items.size(); it += B) {
            const Item& item = items[it];
            bool have = false;
            for (std::size_t k = 0; k < N; ++k) {
                w.stage(va, cx[k][item.r]);
                w.stage(vb, item.xtt ? ct[k] : cx[k][item.c]);
                if (!have) {
                    w.mult(va, vb, acc);
                    have = true;
                } else {
                    w.mult(va, vb, prod);
                    w.add(acc, prod, tmp);
                    std::swap(acc, tmp);
                }
            }
            if (item.xtt)
                out.xt_t[item.r] = w.read(acc);
            else
                out.xtx[item.r][item.c] = w.read(acc);
        }
    };
    if (B == 1) {
        worker_fn(0);
    } else {
        std::thread t1(worker_fn, 0), t2(worker_fn, 1);
        t1.join();
        t2.join();
    }

    std::vector<std::uint64_t> per_bank(B, 0);
    const std::uint64_t n_inputs = N * D + N;
    for (unsigned b = 0; b < B; ++b) per_bank[b] = n_inputs;  // both banks stream all inputs
    detail::finalize(out.report, workers, cfg, per_bank);
    return out;
}

struct MlpModel {
    unsigned input = 784, hidden = 128, output = 10;
    std::vector<std::vector<long>> w1;  // hidden x input
    std::vector<std::vector<long>> w2;  // output x hidden
    long weight_scale = 100;            // F_w
    long activation_scale = 1800;       // F_a
    long act_slope = 1, act_intercept = 900;

    void validate() const {
        if (w1.size() != hidden || w2.size() != output) throw std::invalid_argument("mlp: weight shape mismatch");
        for (const auto& r : w1)
            if (r.size() != input) throw std::invalid_argument("mlp: w1 row width mismatch");
        for (const auto& r : w2)
            if (r.size() != hidden) throw std::invalid_argument("mlp: w2 row width mismatch");
    }
};

inline MlpModel mlp_from_json(const nlohmann::json& j) {
    MlpModel m;
    m.input = j.value("input", 784u);
    m.hidden = j.value("hidden", 128u);
    m.output = j.value("output", 10u);
    m.w1 = j.at("w1").get<std::vector<std::vector<long>>>();
    m.w2 = j.at("w2").get<std::vector<std::vector<long>>>();
    m.weight_scale = j.value("weight_scale", 100L);
    m.activation_scale = j.value("activation_scale", 1800L);
    if (j.contains("activation")) {
        m.act_slope = j.at("activation").value("slope", 1L);
        m.act_intercept = j.at("activation").value("intercept", 900L);
    }
    m.validate();
    return m;
}

inline nlohmann::json mlp_to_json(const MlpModel& m) {
    return {{"input", m.input},     {"hidden", m.hidden},
            {"output", m.output},   {"w1", m.w1},
            {"w2", m.w2},           {"weight_scale", m.weight_scale},
            {"activation_scale", m.activation_scale},
            {"activation", {{"slope", m.act_slope}, {"intercept", m.act_intercept}}}};
}

/// Plaintext integer forward pass reduced mod t (the exact-equality oracle).
inline std::vector<BigInt> mlp_plain_forward(const MlpModel& m, const std::vector<long>& image, unsigned t_log2) {
    std::vector<BigInt> h(m.hidden, BigInt(0));
    for (unsigned i = 0; i < m.hidden; ++i) {
        BigInt acc = 0;
        for (unsigned j = 0; j < m.input; ++j) acc += BigInt(m.w1[i][j]) * image[j];
        h[i] = BigInt(m.act_slope) * acc + m.act_intercept;
    }
    std::vector<BigInt> scores(m.output, BigInt(0));
    for (unsigned o = 0; o < m.output; ++o) {
        BigInt acc = 0;
        for (unsigned i = 0; i < m.hidden; ++i) acc += BigInt(m.w2[o][i]) * h[i];
        scores[o] = reduce_centered(acc, t_log2);
    }
    return scores;
}

inline int argmax_big(const std::vector<BigInt>& v) {
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
}

struct MlpResult {
    std::vector<bfv::Ciphertext> scores;
    int predicted = -1;
    CostReport report;
};

/// Encrypted inference: per-pixel ciphertexts against public integer weights.
/// Weight products use the plaintext Shift-Add shortcut by default; with
/// `force_hommult` the weights are encrypted and full ciphertext-ciphertext
/// multiplications run instead. The affine activation is applied
/// homomorphically; the client decrypts and takes the argmax.
inline MlpResult task_mlp_infer(const std::vector<long>& image, const MlpModel& model, const bfv::KeySet& ks,
                                const TaskConfig& cfg) {
    cfg.validate();
    model.validate();
    if (image.size() != model.input) throw std::invalid_argument("mlp: image size mismatch");
    MlpResult out;
    out.report.task = "mlp";

    std::vector<bfv::Ciphertext> pixels(model.input);
    for (unsigned j = 0; j < model.input; ++j)
        pixels[j] = bfv::encrypt(detail::scalar_pt(cfg.params, image[j]), ks,
                                 cfg.seed + "/px/" + std::to_string(j));

    const unsigned B = cfg.banks;
    std::vector<detail::BankWorker> workers;
    for (unsigned b = 0; b < B; ++b) workers.emplace_back(cfg, ks, cfg.force_hommult);

    std::vector<bfv::Ciphertext> hidden(model.hidden);
    auto layer1 = [&](unsigned b) {
        auto& w = workers[b];
        std::uint32_t px = w.slot(), prod = w.slot(), acc = w.slot(), tmp = w.slot(), wct = w.slot();
        for (unsigned i = b; i < model.hidden; i += B) {
            bool have = false;
            for (unsigned j = 0; j < model.input; ++j) {
                if (model.w1[i][j] == 0) continue;
                w.stage(px, pixels[j]);
                std::uint32_t dstslot = have ? prod : acc;
                if (cfg.force_hommult) {
                    w.stage(wct, bfv::trivial_encrypt(detail::scalar_pt(cfg.params, model.w1[i][j]), cfg.params));
                    w.mult(px, wct, dstslot);
                } else {
                    w.scalar_mult(px, model.w1[i][j], dstslot);
                }
                if (!have) {
                    have = true;
                } else {
                    w.add(acc, prod, tmp);
                    std::swap(acc, tmp);
                }
            }
            if (!have) {
                w.stage(acc, bfv::trivial_encrypt(detail::scalar_pt(cfg.params, 0), cfg.params));
            }
            // affine activation: slope * acc + intercept
            w.scalar_mult(acc, model.act_slope, prod);
            w.stage(tmp, bfv::trivial_encrypt(detail::scalar_pt(cfg.params, model.act_intercept), cfg.params));
            w.add(prod, tmp, acc);
            hidden[i] = w.read(acc);
        }
    };
    if (B == 1) {
        layer1(0);
    } else {
        std::thread t1(layer1, 0), t2(layer1, 1);
        t1.join();
        t2.join();
    }

    out.scores.assign(model.output, bfv::Ciphertext{});
    auto layer2 = [&](unsigned b) {
        auto& w = workers[b];
        std::uint32_t hx = w.slot(), prod = w.slot(), acc = w.slot(), tmp = w.slot(), wct = w.slot();
        for (unsigned o = b; o < model.output; o += B) {
            bool have = false;
            for (unsigned i = 0; i < model.hidden; ++i) {
                if (model.w2[o][i] == 0) continue;
                w.stage(hx, hidden[i]);
                std::uint32_t dstslot = have ? prod : acc;
                if (cfg.force_hommult) {
                    w.stage(wct, bfv::trivial_encrypt(detail::scalar_pt(cfg.params, model.w2[o][i]), cfg.params));
                    w.mult(hx, wct, dstslot);
                } else {
                    w.scalar_mult(hx, model.w2[o][i], dstslot);
                }
                if (!have) {
                    have = true;
                } else {
                    w.add(acc, prod, tmp);
                    std::swap(acc, tmp);
                }
            }
            out.scores[o] = have ? w.read(acc) : bfv::trivial_encrypt(detail::scalar_pt(cfg.params, 0), cfg.params);
        }
    };
    if (B == 1) {
        layer2(0);
    } else {
        std::thread t1(layer2, 0), t2(layer2, 1);
        t1.join();
        t2.join();
    }

    std::vector<BigInt> dec(model.output);
    for (unsigned o = 0; o < model.output; ++o) dec[o] = bfv::decrypt(out.scores[o], ks).poly.coeffs[0];
    out.predicted = argmax_big(dec);

    std::vector<std::uint64_t> per_bank(B, 0);
    for (unsigned b = 0; b < B; ++b) per_bank[b] = model.input;  // one ciphertext per pixel
    detail::finalize(out.report, workers, cfg, per_bank);
    return out;
}

// ---- MNIST IDX ingestion ----------------------------------------------------

struct IdxImages {
    unsigned count = 0, rows = 0, cols = 0;
    std::vector<std::uint8_t> pixels;  // count*rows*cols

    std::vector<long> image(unsigned idx) const {
        std::vector<long> v(rows * cols);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = pixels[std::size_t(idx) * rows * cols + i];
        return v;
    }
};

namespace detail {
inline std::uint32_t read_be32(std::istream& is) {
    std::uint8_t b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("idx: truncated header");
    return std::uint32_t(b[0]) << 24 | std::uint32_t(b[1]) << 16 | std::uint32_t(b[2]) << 8 | b[3];
}
}  // namespace detail

/// Big-endian IDX image file (magic 0x00000803).
inline IdxImages read_idx_images(std::istream& is) {
    if (detail::read_be32(is) != 0x00000803u) throw std::runtime_error("idx: bad image magic");
    IdxImages out;
    out.count = detail::read_be32(is);
    out.rows = detail::read_be32(is);
    out.cols = detail::read_be32(is);
    out.pixels.resize(std::size_t(out.count) * out.rows * out.cols);
    is.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(out.pixels.size()));
    if (!is) throw std::runtime_error("idx: truncated pixel data");
    return out;
}

/// Big-endian IDX label file (magic 0x00000801).
inline std::vector<std::uint8_t> read_idx_labels(std::istream& is) {
    if (detail::read_be32(is) != 0x00000801u) throw std::runtime_error("idx: bad label magic");
    const std::uint32_t count = detail::read_be32(is);
    std::vector<std::uint8_t> labels(count);
    is.read(reinterpret_cast<char*>(labels.data()), count);
    if (!is) throw std::runtime_error("idx: truncated labels");
    return labels;
}

}  // namespace pimhe::tasks
