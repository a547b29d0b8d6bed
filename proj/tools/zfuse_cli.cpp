// zfuse command-line front end: fuse, fuse-pair, metrics, bench, synth.

#include "zfuse/zfuse.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>

namespace {

using namespace zfuse;

std::optional<Layout> parse_layout(const std::string& s) {
    if (s.empty()) return std::nullopt;
    if (s == "stack") return Layout::slice_stack;
    if (s == "raw") return Layout::raw_file;
    throw ArgumentError("unknown layout '" + s + "'");
}

// out/ -> out_smoothed/, out.raw -> out_smoothed.raw
fs::path smoothed_path(const fs::path& out, Layout layout) {
    fs::path p = out;
    if (p.filename().empty()) p = p.parent_path();
    if (layout == Layout::raw_file) {
        return p.parent_path() / (p.stem().string() + "_smoothed" + p.extension().string());
    }
    return p.parent_path() / (p.filename().string() + "_smoothed");
}

struct FuseArgs {
    std::string in, out, layout;
    FusionParams params;
    SolverConfig solver;
    std::size_t workers = hardware_workers();
    bool keep_smoothed = false;
    bool resume = false;
};

int run_fuse(const FuseArgs& a) {
    const VolumeMeta input = probe(a.in);
    const Layout layout = parse_layout(a.layout).value_or(input.layout);
    RunOptions opt;
    opt.workers = a.workers;
    opt.resume = a.resume;
    if (opt.resume && layout == Layout::raw_file) {
        std::cerr << "zfuse: warning: --resume only applies to the stack layout; recomputing every slice\n";
    }
    if (a.keep_smoothed) opt.smoothed_output = output_like(input, smoothed_path(a.out, layout), layout);
    std::cerr << "zfuse: " << input.width << "x" << input.height << "x" << input.depth << " (" << input.channels
              << " channel(s), " << input.bit_depth << "-bit, " << to_string(input.layout) << ")\n";
    RunReport r = fuse_stack(input, output_like(input, a.out, layout), a.params, a.solver, opt);
    r.add("sigma_xy", a.params.sigma_xy);
    r.add("sigma_z", a.params.sigma_z);
    r.add("alpha", a.params.alpha);
    r.add("truncation", a.params.truncation);
    r.add("robust", a.params.robust ? "1" : "0");
    std::cout << r.to_text();
    if (r.nonconverged > 0) {
        std::cerr << "zfuse: warning: " << r.nonconverged << " solve(s) did not reach the residual tolerance\n";
    }
    return 0;
}

struct PairArgs {
    std::string low, high, out;
    double alpha = 0.001;
    SolverConfig solver;
    std::size_t bit_depth = 0;
};

int run_fuse_pair(const PairArgs& a) {
    const Slice low = read_image(a.low);
    const Slice high = read_image(a.high);
    std::vector<SolveStats> stats;
    const Slice out = fuse_pair(low, high, a.alpha, a.solver, &stats);
    std::size_t bits = a.bit_depth;
    if (bits == 0) bits = std::max(png::read_header(a.low).bit_depth, png::read_header(a.high).bit_depth);
    write_image(a.out, out, bits);
    double worst = 0;
    std::size_t failed = 0;
    for (const SolveStats& s : stats) {
        worst = std::max(worst, s.residual);
        if (!s.converged) ++failed;
    }
    std::cout << "width=" << out.width() << "\nheight=" << out.height() << "\nchannels=" << out.channels()
              << "\nbit_depth=" << bits << "\nresidual_max=" << worst << "\nnonconverged=" << failed << '\n';
    return 0;
}

struct MetricsArgs {
    std::string reference, result;
};

int run_metrics(const MetricsArgs& a) {
    const VolumeMeta ref = probe(a.reference);
    const VolumeMeta res = probe(a.result);
    if (ref.width != res.width || ref.height != res.height || ref.depth != res.depth || ref.channels != res.channels) {
        throw ArgumentError("volumes differ in dimensions (" + std::to_string(ref.width) + "x" +
                            std::to_string(ref.height) + "x" + std::to_string(ref.depth) + " vs " +
                            std::to_string(res.width) + "x" + std::to_string(res.height) + "x" +
                            std::to_string(res.depth) + ")");
    }
    const Discontinuity dr = interslice_discontinuity(ref);
    const Discontinuity ds = interslice_discontinuity(res);
    const double gp = gradient_preservation(ref, res);
    std::ostringstream os;
    os << std::setprecision(10);
    os << "reference_discontinuity=" << dr.total() << '\n'
       << "reference_mean_term=" << dr.mean_term << '\n'
       << "reference_lowpass_term=" << dr.lowpass_term << '\n'
       << "result_discontinuity=" << ds.total() << '\n'
       << "result_mean_term=" << ds.mean_term << '\n'
       << "result_lowpass_term=" << ds.lowpass_term << '\n'
       << "discontinuity_delta=" << ds.total() - dr.total() << '\n'
       << "discontinuity_reduction=" << (dr.total() > 0 ? 1.0 - ds.total() / dr.total() : 0.0) << '\n'
       << "gradient_preservation=" << gp << '\n';
    std::cout << os.str();
    return 0;
}

struct BenchArgs {
    std::vector<std::string> sizes{"64", "128", "256"};
    std::size_t workers = 1;
    std::string dir;
    bool keep = false;
};

// "128" -> 128^3, "256x128x64" -> w x h x d
std::array<std::size_t, 3> parse_size(const std::string& s) {
    std::array<std::size_t, 3> d{};
    std::stringstream ss(s);
    std::string part;
    std::size_t n = 0;
    while (std::getline(ss, part, 'x')) {
        if (n == 3 || part.empty() || part.find_first_not_of("0123456789") != std::string::npos) n = 4;
        if (n >= 3) break;
        d[n++] = std::stoul(part);
    }
    if (n == 1) d[1] = d[2] = d[0];
    else if (n != 3) throw ArgumentError("bad size '" + s + "' (expected N or WxHxD)");
    if (d[0] == 0 || d[1] == 0 || d[2] == 0) throw ArgumentError("bad size '" + s + "'");
    return d;
}

int run_bench(const BenchArgs& a) {
    std::vector<std::array<std::size_t, 3>> sizes;
    for (const auto& s : a.sizes) sizes.push_back(parse_size(s));
    const fs::path root = a.dir.empty()
                              ? fs::temp_directory_path() / ("zfuse_bench_" + std::to_string(::getpid()))
                              : fs::path(a.dir);
    fs::create_directories(root);
    std::cout << "[bench]\n";
    for (const auto& d : sizes) {
        synthetic::StackSpec spec;
        spec.width = d[0];
        spec.height = d[1];
        spec.depth = d[2];
        const std::string tag = std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
        std::cerr << "zfuse: bench " << tag << '\n';
        const VolumeMeta in = synthetic::write_stack(spec, root / (tag + "_in.raw"), Layout::raw_file);
        const VolumeMeta out = output_like(in, root / (tag + "_out.raw"), Layout::raw_file);
        RunOptions opt;
        opt.workers = a.workers;
        const RunReport r = fuse_stack(in, out, FusionParams{}, SolverConfig{}, opt);
        std::cout << std::setprecision(6) << "size=" << tag << " voxels=" << d[0] * d[1] * d[2]
                  << " workers=" << r.workers << " wall_seconds=" << r.wall_seconds
                  << " read_seconds=" << r.read_seconds << " smooth_seconds=" << r.smooth_seconds
                  << " solve_seconds=" << r.solve_seconds << " write_seconds=" << r.write_seconds
                  << " peak_bytes=" << r.peak_bytes << " residual_max=" << r.residual_max
                  << " nonconverged=" << r.nonconverged << '\n';
        if (!a.keep) {
            fs::remove(in.path);
            fs::remove(out.path);
        }
    }
    if (!a.keep && a.dir.empty()) fs::remove_all(root);
    return 0;
}

struct SynthArgs {
    std::string out, layout = "stack";
    synthetic::StackSpec spec;
    std::optional<std::size_t> corrupt;
    std::size_t bit_depth = 16;
};

int run_synth(SynthArgs a) {
    a.spec.corrupt_slice = a.corrupt;
    const VolumeMeta m = synthetic::write_stack(a.spec, a.out, *parse_layout(a.layout), a.bit_depth);
    std::cout << "path=" << m.path.string() << "\nwidth=" << m.width << "\nheight=" << m.height
              << "\ndepth=" << m.depth << "\nlayout=" << to_string(m.layout) << '\n';
    return 0;
}

const CLI::Validator positive(
    [](std::string& v) -> std::string {
        double x = 0;
        try {
            x = std::stod(v);
        } catch (const std::exception&) {
            return "not a number: " + v;
        }
        return x > 0 ? std::string{} : "must be > 0 (got " + v + ")";
    },
    "POSITIVE");

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zfuse: removes inter-slice brightness and colour jumps from image stacks", "zfuse"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "zfuse 0.1.0");

    FuseArgs fuse;
    auto* f = app.add_subcommand("fuse", "Smooth a stack across slices and fuse its detail back in, slice by slice");
    f->add_option("--in", fuse.in, "Input volume: directory of <prefix><index>.png slices or a .raw file")
        ->required();
    f->add_option("--out", fuse.out, "Output volume path (directory or .raw file)")->required();
    f->add_option("--layout", fuse.layout, "Output layout: stack or raw (default: same as input)")
        ->check(CLI::IsMember({"stack", "raw"}));
    f->add_option("--sigma-xy", fuse.params.sigma_xy, "In-plane Gaussian sigma, in pixels")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    f->add_option("--sigma-z", fuse.params.sigma_z, "Across-slice Gaussian sigma, in slices")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    f->add_option("--alpha", fuse.params.alpha, "Screening weight; must be > 0")
        ->check(positive)
        ->capture_default_str();
    f->add_option("--truncation", fuse.params.truncation, "Kernel radius in sigmas")
        ->check(positive)
        ->capture_default_str();
    f->add_flag("--robust", fuse.params.robust, "Drop outliers beyond 2 std when averaging along z");
    f->add_option("--workers", fuse.workers, "Worker threads (default: hardware thread count)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1024}));
    f->add_option("--tolerance", fuse.solver.tolerance, "Relative residual target per solve")
        ->check(positive)
        ->capture_default_str();
    f->add_option("--v-cycles", fuse.solver.v_cycles, "Maximum multigrid V-cycles per solve")
        ->check(CLI::Range(std::size_t{1}, std::size_t{10000}))
        ->capture_default_str();
    f->add_flag("--keep-smoothed", fuse.keep_smoothed,
                "Also write the smoothed volume next to the output (<out>_smoothed)");
    f->add_flag("--resume", fuse.resume, "Skip output slices that already exist (stack layout)");

    PairArgs pair;
    auto* p = app.add_subcommand("fuse-pair", "Merge the low frequencies of one image with the detail of another");
    p->add_option("--low", pair.low, "Image supplying colour and low frequencies")->required();
    p->add_option("--high", pair.high, "Image supplying fine detail")->required();
    p->add_option("--out", pair.out, "Output PNG")->required();
    p->add_option("--alpha", pair.alpha, "Screening weight; must be > 0")
        ->check(positive)
        ->capture_default_str();
    p->add_option("--tolerance", pair.solver.tolerance, "Relative residual target")
        ->check(positive)
        ->capture_default_str();
    p->add_option("--v-cycles", pair.solver.v_cycles, "Maximum multigrid V-cycles")
        ->check(CLI::Range(std::size_t{1}, std::size_t{10000}))
        ->capture_default_str();
    p->add_option("--bit-depth", pair.bit_depth, "Output bit depth, 8 or 16 (default: deeper input)")
        ->check(CLI::IsMember({8, 16}));

    MetricsArgs metrics;
    auto* m = app.add_subcommand("metrics", "Compare inter-slice discontinuity and gradients of two volumes");
    m->add_option("--reference", metrics.reference, "Reference volume (usually the input)")->required();
    m->add_option("--result", metrics.result, "Result volume (usually the fused output)")->required();

    BenchArgs bench;
    auto* b = app.add_subcommand("bench", "Time fusion of generated volumes over a size ladder");
    b->add_option("--sizes", bench.sizes, "Sizes as N (cube) or WxHxD")->delimiter(',')->capture_default_str();
    b->add_option("--workers", bench.workers, "Worker threads")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1024}))
        ->capture_default_str();
    b->add_option("--dir", bench.dir, "Scratch directory (default: a temporary directory)");
    b->add_flag("--keep", bench.keep, "Keep the generated volumes");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Write a synthetic test stack: fixed texture plus per-slice offsets");
    s->add_option("--out", synth.out, "Output volume path")->required();
    s->add_option("--layout", synth.layout, "stack or raw")->check(CLI::IsMember({"stack", "raw"}))->capture_default_str();
    s->add_option("--width", synth.spec.width)->check(positive)->capture_default_str();
    s->add_option("--height", synth.spec.height)->check(positive)->capture_default_str();
    s->add_option("--depth", synth.spec.depth)->check(positive)->capture_default_str();
    s->add_option("--offset", synth.spec.offset_amplitude, "Per-slice offsets are uniform in [-offset, offset]")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    s->add_option("--seed", synth.spec.seed)->capture_default_str();
    s->add_option("--corrupt", synth.corrupt, "Zero the lower half of this slice");
    s->add_option("--bit-depth", synth.bit_depth)->check(CLI::IsMember({8, 16}))->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (f->parsed()) return run_fuse(fuse);
        if (p->parsed()) return run_fuse_pair(pair);
        if (m->parsed()) return run_metrics(metrics);
        if (b->parsed()) return run_bench(bench);
        if (s->parsed()) return run_synth(synth);
    } catch (const std::exception& e) {
        std::cerr << "zfuse: error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
