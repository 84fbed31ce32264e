// Command-line front end: key management, encrypted evaluation on the
// simulated bank, primitive step-trace emission, end-to-end tasks, depth
// queries and a small cost benchmark. Machine-readable output is JSON on
// stdout; diagnostics go to stderr and exit codes are nonzero on failure.

#include "pimhe/config.hpp"
#include "pimhe/cim/hom.hpp"
#include "pimhe/serialize.hpp"
#include "pimhe/tasks.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace pimhe;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string preset = "desk-16";
    std::string geometry = "";
    unsigned banks = 1;
    std::string seed = "pimhe";
    unsigned relin_w = 0;  // 0: default for the preset size

    Config cfg;

    void finish() { cfg = config_path.empty() ? Config{} : Config::load(config_path); }
    ParamSet params() const { return cfg.params(preset); }
    unsigned w() const {
        if (relin_w) return relin_w;
        return params().k >= 120 ? 30 : 8;
    }
    tasks::TaskConfig task_config() const {
        tasks::TaskConfig t;
        t.params = params();
        t.cost = cfg.cost;
        t.transfer = cfg.transfer;
        t.banks = banks;
        t.relin_w = w();
        t.seed = seed;
        if (geometry.empty())
            t.fit_geometry();
        else
            t.geometry = cfg.geometry(geometry);
        return t;
    }
    cim::BankGeometry exec_geometry(const ParamSet& p) const {
        if (!geometry.empty()) return cfg.geometry(geometry);
        tasks::TaskConfig t;
        t.params = p;
        t.fit_geometry();
        return t.geometry;
    }
};

bfv::KeySet load_keys(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open key file: " + path);
    return read_keyset(f);
}

bfv::Ciphertext load_ct(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open ciphertext file: " + path);
    return read_ciphertext(f);
}

std::vector<long> load_long_array(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open input file: " + path);
    json j;
    f >> j;
    return j.get<std::vector<long>>();
}

std::string rational_str(const BigInt& num, const BigInt& den) {
    BigInt g = boost::multiprecision::gcd(num < 0 ? BigInt(-num) : num, den);
    if (g == 0) g = 1;
    BigInt n = num / g, d = den / g;
    if (d == 1) return n.str();
    return n.str() + "/" + d.str();
}

int cmd_keygen(const CommonOpts& opts, const std::string& out) {
    auto p = opts.params();
    auto ks = bfv::keygen(p, opts.seed, opts.w());
    atomic_write_file(out, [&](std::ostream& os) { write_keyset(os, ks); });
    json rep{{"keys", out},     {"preset", opts.preset},          {"k", p.k},
             {"n", p.n},        {"relin_digits", ks.rlk.size()},  {"relin_w", ks.decomp_log2}};
    std::cout << rep.dump(2) << "\n";
    return 0;
}

int cmd_encrypt(const CommonOpts& opts, const std::string& keys, long value, const std::string& out) {
    auto ks = load_keys(keys);
    bfv::Plaintext m{RingPoly(ks.params.t_log2, ks.params.n)};
    m.poly.coeffs[0] = reduce_centered(BigInt(value), ks.params.t_log2);
    auto ct = bfv::encrypt(m, ks, opts.seed);
    atomic_write_file(out, [&](std::ostream& os) { write_ciphertext(os, ct); });
    std::cout << json{{"ciphertext", out}, {"value", value}}.dump(2) << "\n";
    return 0;
}

int cmd_decrypt(const std::string& keys, const std::string& in, long client_div) {
    auto ks = load_keys(keys);
    auto ct = load_ct(in);
    auto m = bfv::decrypt(ct, ks);
    json coeffs = json::array();
    for (const auto& c : m.poly.coeffs) coeffs.push_back(c.str());
    json rep{{"value", m.poly.coeffs[0].str()},
             {"value_canonical", mod_pow2(m.poly.coeffs[0], ks.params.t_log2).str()},
             {"coeffs", coeffs},
             {"level_hint", ct.level_hint}};
    if (client_div > 1)
        rep["client_value"] = rational_str(m.poly.coeffs[0], BigInt(client_div));  // client-side division
    std::cout << rep.dump(2) << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& op_name, const std::string& keys, const std::string& a,
             const std::string& b, const std::string& out) {
    auto ks = load_keys(keys);
    auto ca = load_ct(a);
    auto cb = load_ct(b);
    cim::HomOp op = op_name == "add" ? cim::HomOp::Add : op_name == "sub" ? cim::HomOp::Sub : cim::HomOp::Mult;
    auto g = opts.exec_geometry(ks.params);
    auto [ct, tr] = cim::run_hom_op(op, ca, cb, ks, g, opts.cfg.cost);
    atomic_write_file(out, [&](std::ostream& os) { write_ciphertext(os, ct); });
    std::cout << json{{"op", op_name}, {"out", out}, {"trace", tr.totals_json()}}.dump(2) << "\n";
    return 0;
}

int cmd_depth(const CommonOpts& opts) {
    std::cout << multiplicative_depth(opts.params()).depth << "\n";
    return 0;
}

int cmd_sim(const CommonOpts& opts, const std::string& primitive, unsigned kprime, unsigned n_override,
            const std::string& trace_path) {
    ParamSet p = opts.params();
    if (n_override) p.n = n_override;
    cim::BankGeometry geo = opts.exec_geometry(p);
    cim::CimBank bank(geo);
    cim::ScratchAllocator alloc(geo, cim::ProgramBuilder::first_pool_row(geo));
    cim::StepProgram prog;
    cim::ProgramCollector col(prog);
    cim::ProgramBuilder pb(geo, col, prog.pool, p.k, &alloc);
    PrfStream rng(opts.seed, "sim/" + primitive);

    auto stage_poly = [&](const RingPoly& poly) {
        cim::AddrVec v = alloc.alloc(poly.n);
        for (unsigned i = 0; i < poly.n; ++i) bank.write_slot(v[i], mod_pow2(poly.coeffs[i], geo.word_bits));
        return v;
    };
    RingPoly pa(p.k, p.n), pb_(p.k, p.n);
    for (unsigned i = 0; i < p.n; ++i) {
        pa.coeffs[i] = reduce_centered(rng.next_bits(p.k), p.k);
        pb_.coeffs[i] = reduce_centered(rng.next_bits(p.k), p.k);
    }

    if (primitive == "polyadd") {
        auto va = stage_poly(pa), vb = stage_poly(pb_), vo = alloc.alloc(p.n);
        cim::compile_poly_add(pb, va, vb, vo);
    } else if (primitive == "polysub") {
        auto va = stage_poly(pa), vb = stage_poly(pb_), vo = alloc.alloc(p.n);
        cim::compile_poly_sub(pb, va, vb, vo);
    } else if (primitive == "polyscale") {
        auto va = stage_poly(pa);
        cim::compile_poly_scale(pb, va, kprime);
    } else if (primitive == "modreduce") {
        auto va = stage_poly(pa);
        cim::compile_mod_reduce(pb, va);
    } else if (primitive == "polymult") {
        auto va = stage_poly(pa), vb = stage_poly(pb_), vo = alloc.alloc(p.n);
        cim::compile_poly_mult(pb, va, vb, vo);
    } else if (primitive == "shiftadd") {
        auto va = stage_poly(pa), vb = stage_poly(pb_), vo = alloc.alloc(1);
        cim::ProgramBuilder::LeafJob j;
        j.a = va[0];
        j.b = vb[0];
        j.dst = vo[0];
        j.width = p.k;
        j.signed_operands = true;
        pb.shift_add_products({j});
    } else if (primitive == "karatsuba") {
        // the worked 11 x 6 example, split at 2-bit halves
        cim::AddrVec va = alloc.alloc(1), vb = alloc.alloc(1), vo = alloc.alloc(1);
        bank.write_slot(va[0], BigInt(11));
        bank.write_slot(vb[0], BigInt(6));
        pb.karatsuba_int(va[0], vb[0], 4, 4, 2, vo[0], &prog.landmarks);
        std::sort(prog.landmarks.begin(), prog.landmarks.end(),
                  [](const cim::Landmark& x, const cim::Landmark& y) { return x.step_index < y.step_index; });
    } else {
        throw std::invalid_argument("unknown primitive: " + primitive);
    }

    cim::Executor ex(bank, opts.cfg.cost, /*record=*/true);
    ex.run(prog);
    if (!trace_path.empty())
        atomic_write_file(trace_path, [&](std::ostream& os) { ex.trace.write_jsonl(os); });

    json rep{{"primitive", primitive}, {"steps", prog.steps.size()}, {"trace", ex.trace.totals_json()}};
    if (!ex.trace.landmark_values.empty()) {
        json landmarks = json::array();
        for (const auto& [label, value] : ex.trace.landmark_values)
            landmarks.push_back({{"label", label}, {"value", value.str()}});
        rep["landmarks"] = landmarks;
    }
    if (primitive == "polyscale")
        rep["shift_rounds"] = static_cast<unsigned>(cim::greedy_shift_rounds(kprime).size());
    if (!trace_path.empty()) rep["trace_file"] = trace_path;
    std::cout << rep.dump(2) << "\n";
    return 0;
}

int cmd_task(const CommonOpts& opts, const std::string& kind, const std::string& inputs,
             const std::string& model_path, const std::string& image_path, unsigned image_index,
             bool force_hommult) {
    tasks::TaskConfig cfg = opts.task_config();
    cfg.force_hommult = force_hommult;
    auto ks = bfv::keygen(cfg.params, cfg.seed, cfg.relin_w);
    json rep;
    if (kind == "mean") {
        auto xs = load_long_array(inputs);
        auto [ct, r] = tasks::task_mean(xs, ks, cfg);
        rep = r.to_json();
        BigInt sum = bfv::decrypt(ct, ks).poly.coeffs[0];
        rep["decrypted_sum"] = sum.str();
        rep["client_mean"] = rational_str(sum, BigInt(static_cast<long>(xs.size())));
    } else if (kind == "variance") {
        auto xs = load_long_array(inputs);
        auto [ct, r] = tasks::task_variance(xs, ks, cfg);
        rep = r.to_json();
        BigInt num = bfv::decrypt(ct, ks).poly.coeffs[0];
        const long n = static_cast<long>(xs.size());
        rep["decrypted_numerator"] = num.str();
        rep["client_variance"] = rational_str(num, BigInt(n) * n * n);
    } else if (kind == "linreg") {
        std::ifstream f(inputs);
        if (!f) throw std::runtime_error("cannot open input file: " + inputs);
        json j;
        f >> j;
        auto X = j.at("X").get<std::vector<std::vector<long>>>();
        auto t = j.at("t").get<std::vector<long>>();
        auto r = tasks::task_linreg(X, t, ks, cfg);
        rep = r.report.to_json();
        json xtx = json::array(), xtt = json::array();
        for (auto& row : r.xtx) {
            json jr = json::array();
            for (auto& ct : row) jr.push_back(bfv::decrypt(ct, ks).poly.coeffs[0].str());
            xtx.push_back(jr);
        }
        for (auto& ct : r.xt_t) xtt.push_back(bfv::decrypt(ct, ks).poly.coeffs[0].str());
        rep["decrypted_xtx"] = xtx;
        rep["decrypted_xt_t"] = xtt;
    } else {  // mlp
        std::ifstream mf(model_path);
        if (!mf) throw std::runtime_error("cannot open model file: " + model_path);
        json mj;
        mf >> mj;
        auto model = tasks::mlp_from_json(mj);
        std::vector<long> image;
        if (!image_path.empty()) {
            std::ifstream imf(image_path, std::ios::binary);
            if (!imf) throw std::runtime_error("cannot open image file: " + image_path);
            auto imgs = tasks::read_idx_images(imf);
            if (image_index >= imgs.count) throw std::invalid_argument("image index out of range");
            image = imgs.image(image_index);
        } else {
            image.assign(model.input, 0);
        }
        auto r = tasks::task_mlp_infer(image, model, ks, cfg);
        rep = r.report.to_json();
        json scores = json::array();
        for (auto& ct : r.scores) scores.push_back(bfv::decrypt(ct, ks).poly.coeffs[0].str());
        rep["decrypted_scores"] = scores;
        rep["predicted"] = r.predicted;
        auto plain = tasks::mlp_plain_forward(model, image, cfg.params.t_log2);
        rep["plain_argmax"] = tasks::argmax_big(plain);
    }
    rep["preset"] = opts.preset;
    std::cout << rep.dump(2) << "\n";
    return 0;
}

int cmd_bench(const CommonOpts& opts, const std::vector<std::string>& preset_names) {
    json table = json::array();
    for (const auto& name : preset_names) {
        ParamSet p = opts.cfg.params(name);
        if (p.n > 64) {
            std::cerr << "bench: skipping large preset " << name << " (use eval for full-size runs)\n";
            continue;
        }
        tasks::TaskConfig t;
        t.params = p;
        t.fit_geometry();
        const unsigned w = p.k >= 120 ? 30 : 8;
        auto ks = bfv::keygen(p, opts.seed, w);
        bfv::Plaintext m{RingPoly(p.t_log2, p.n)};
        m.poly.coeffs[0] = 2;
        auto c1 = bfv::encrypt(m, ks, "bench1");
        auto c2 = bfv::encrypt(m, ks, "bench2");
        json row{{"preset", name}};
        for (auto [op, opname] : {std::pair<cim::HomOp, const char*>{cim::HomOp::Add, "homadd"},
                                  {cim::HomOp::Sub, "homsub"},
                                  {cim::HomOp::Mult, "hommult"}}) {
            auto [ct, tr] = cim::run_hom_op(op, c1, c2, ks, t.geometry, opts.cfg.cost);
            const std::uint64_t one = tr.total_cycles();
            row[opname] = {{"cycles_per_op", one},
                           {"energy_per_op", tr.total_energy_milli() / 1000.0},
                           {"two_ops_one_bank_cycles", 2 * one},
                           {"two_ops_two_banks_cycles", one}};
        }
        table.push_back(row);
    }
    std::cout << table.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"functional simulator for in-memory somewhat-homomorphic evaluation"};
    app.require_subcommand(1);

    CommonOpts opts;
    app.add_option("--config", opts.config_path, "JSON config file (presets, geometries, cost model)");
    app.add_option("--preset", opts.preset, "parameter preset name")->capture_default_str();
    app.add_option("--geometry", opts.geometry, "bank geometry name (default: sized to the preset)");
    app.add_option("--banks", opts.banks, "bank count (1 or 2)")->capture_default_str();
    app.add_option("--seed", opts.seed, "deterministic seed string")->capture_default_str();
    app.add_option("--relin-w", opts.relin_w, "relinearization digit width (default 30 large / 8 desk)");

    std::string out = "out.bin", keys = "keys.bin", in_a, in_b, in_path;
    long value = 0, client_div = 1;
    unsigned kprime = 127, n_override = 0, image_index = 0;
    std::string trace_path, model_path, image_path;
    bool force_hommult = false;

    auto* keygen_cmd = app.add_subcommand("keygen", "generate a key set");
    keygen_cmd->add_option("--out", out, "output key file")->capture_default_str();

    auto* enc = app.add_subcommand("encrypt", "encrypt an integer as a constant polynomial");
    enc->add_option("--keys", keys)->required();
    enc->add_option("--value", value)->required();
    enc->add_option("--out", out)->capture_default_str();

    auto* dec = app.add_subcommand("decrypt", "decrypt a ciphertext file");
    dec->add_option("--keys", keys)->required();
    dec->add_option("--in", in_a)->required();
    dec->add_option("--client-div", client_div, "client-side exact division of the constant term");

    auto* eval = app.add_subcommand("eval", "run one homomorphic op through the simulated bank");
    std::string eval_op;
    eval->add_option("op", eval_op, "add|sub|mult")->required()->check(CLI::IsMember({"add", "sub", "mult"}));
    eval->add_option("--keys", keys)->required();
    eval->add_option("--a", in_a)->required();
    eval->add_option("--b", in_b)->required();
    eval->add_option("--out", out)->capture_default_str();

    auto* depth = app.add_subcommand("depth", "print the supported multiplicative depth");

    auto* sim = app.add_subcommand("sim", "compile and execute one primitive, emitting a step trace");
    std::string primitive;
    sim->add_option("primitive", primitive, "polyadd|polysub|polyscale|polymult|modreduce|shiftadd|karatsuba")
        ->required();
    sim->add_option("--kprime", kprime, "scale shift amount")->capture_default_str();
    sim->add_option("--n", n_override, "override ring degree");
    sim->add_option("--trace", trace_path, "write the JSONL step trace to this file");

    auto* task = app.add_subcommand("task", "run an end-to-end encrypted task");
    std::string task_kind;
    task->add_option("kind", task_kind, "mean|variance|linreg|mlp")
        ->required()
        ->check(CLI::IsMember({"mean", "variance", "linreg", "mlp"}));
    task->add_option("--inputs", in_path, "JSON input file (mean/variance: array; linreg: {X,t})");
    task->add_option("--model", model_path, "MLP model JSON");
    task->add_option("--image", image_path, "IDX image file");
    task->add_option("--image-index", image_index, "image index within the IDX file");
    task->add_flag("--force-hommult", force_hommult,
                   "multiply by encrypted weights instead of the plaintext shortcut");

    auto* bench = app.add_subcommand("bench", "per-op cost table across presets");
    std::vector<std::string> bench_presets{"desk-16", "desk-64"};
    bench->add_option("--presets", bench_presets, "preset names")->capture_default_str();

    for (auto* sc : app.get_subcommands(nullptr)) sc->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        opts.finish();
        if (*keygen_cmd) return cmd_keygen(opts, out);
        if (*enc) return cmd_encrypt(opts, keys, value, out);
        if (*dec) return cmd_decrypt(keys, in_a, client_div);
        if (*eval) return cmd_eval(opts, eval_op, keys, in_a, in_b, out);
        if (*depth) return cmd_depth(opts);
        if (*sim) return cmd_sim(opts, primitive, kprime, n_override, trace_path);
        if (*task) return cmd_task(opts, task_kind, in_path, model_path, image_path, image_index, force_hommult);
        if (*bench) return cmd_bench(opts, bench_presets);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
