// Command-line driver: precompute bundles, extract structures, sweep
// parameter grids, serve sessions over HTTP and print timing tables.

#include "diffstruct/pipeline.hpp"
#include "diffstruct/service.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace diffstruct;

namespace {

struct Options {
    std::string config;
    std::string mesh;
    std::string bundle;
    std::string params;
    std::string out;
    std::string host = "127.0.0.1";
    int port = 8080;
    int k = 0;
    int max_depth = -1;
    std::vector<std::string> vary;
    std::vector<std::string> bundles;
};

SessionConfig read_config(const Options& o)
{
    SessionConfig c = load_config(o.config);
    if (!o.mesh.empty()) c.mesh_path = o.mesh;
    if (o.k > 0) c.k = o.k;
    if (o.max_depth >= 0) c.max_depth = o.max_depth;
    return c;
}

SessionBundle obtain_bundle(const Options& o)
{
    if (!o.bundle.empty()) {
        SessionBundle b = load_bundle(fs::path(o.bundle));
        if (o.k > 0 && o.k != b.num_modes()) b = recompute_k(b, o.k);
        if (o.max_depth >= 0) b.config.max_depth = o.max_depth;
        return b;
    }
    if (o.config.empty()) throw ConfigError("either --bundle or --config is required");
    return precompute(read_config(o));
}

StripeParams read_params(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open params " + path);
    try {
        return json::parse(in).get<StripeParams>();
    } catch (const json::exception& e) {
        throw ConfigError("params " + path + ": " + e.what());
    }
}

// Brings the bundle in line with the non-real-time knobs of the params.
const SessionBundle& matching_bundle(SessionBundle& b, const StripeParams& p)
{
    if (p.gamma != b.config.gamma) {
        std::cerr << "recomputing for gamma=" << p.gamma << '\n';
        b = recompute_gamma(b, p.gamma);
    }
    if (p.r != b.config.anisotropy.r) {
        std::cerr << "recomputing for r=" << p.r << '\n';
        b = recompute_r(b, p.r);
    }
    return b;
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

int run_precompute(const Options& o)
{
    const SessionBundle b = precompute(read_config(o));
    const fs::path out = o.out.empty() ? fs::path("session.dsb") : fs::path(o.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_bundle(out, b);
    std::cout << format_timing_table({{b.config.name.empty() ? out.stem().string() : b.config.name,
                                       b.mesh.num_vertices(), b.mesh.num_faces(), b.timing}});
    std::cout << "wrote " << out.string() << '\n';
    return 0;
}

int run_extract(const Options& o)
{
    SessionBundle b = obtain_bundle(o);
    const StripeParams p = o.params.empty() ? StripeParams{.gamma = b.config.gamma, .r = b.config.anisotropy.r}
                                            : read_params(o.params);
    const StructureExport result = export_structure(matching_bundle(b, p), p, b.config.max_depth);
    const fs::path out = o.out.empty() ? fs::path("structure.obj") : fs::path(o.out);
    write_text(out, result.obj);
    if (result.mesh.empty()) std::cerr << "warning: empty structure\n";
    if (result.mesh.unresolved_faces > 0) {
        std::cerr << "warning: " << result.mesh.unresolved_faces << " faces still crossed more than once at maxDepth\n";
    }
    std::cout << "wrote " << out.string() << " (" << result.mesh.mesh.num_faces() << " faces)\n";
    return 0;
}

int run_sweep(const Options& o)
{
    if (o.vary.empty()) throw ConfigError("sweep needs at least one --vary name=v1,v2,...");
    SessionBundle b = obtain_bundle(o);
    const StripeParams base = o.params.empty() ? StripeParams{.gamma = b.config.gamma, .r = b.config.anisotropy.r}
                                               : read_params(o.params);

    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    for (const std::string& spec : o.vary) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--vary expects name=v1,v2,...: " + spec);
        std::vector<std::string> values;
        std::stringstream ss(spec.substr(eq + 1));
        for (std::string v; std::getline(ss, v, ',');)
            if (!v.empty()) values.push_back(v);
        if (values.empty()) throw ConfigError("--vary " + spec + " lists no values");
        axes.emplace_back(spec.substr(0, eq), values);
    }

    const fs::path dir = o.out.empty() ? fs::path("sweep") : fs::path(o.out);
    std::vector<std::size_t> index(axes.size(), 0);
    int written = 0;
    for (;;) {
        json j = base;
        std::string name = "structure";
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const auto& [key, values] = axes[a];
            if (!j.contains(key)) throw ConfigError("unknown stripe parameter '" + key + "'");
            j[key] = json::parse(values[index[a]]);
            name += "_" + key + "-" + values[index[a]];
        }
        const StripeParams p = j.get<StripeParams>();
        const StructureExport result = export_structure(matching_bundle(b, p), p, b.config.max_depth);
        const fs::path path = dir / (name + ".obj");
        write_text(path, result.obj);
        if (result.mesh.empty()) std::cerr << "warning: empty structure for " << name << '\n';
        std::cout << path.string() << '\n';
        ++written;

        std::size_t a = 0;
        for (; a < axes.size(); ++a) {
            if (++index[a] < axes[a].second.size()) break;
            index[a] = 0;
        }
        if (a == axes.size()) break;
    }
    std::cout << written << " structures written to " << dir.string() << '\n';
    return 0;
}

int run_serve(const Options& o)
{
    HttpService service;
    std::cout << "serving on " << o.host << ':' << o.port << std::endl;
    service.run(o.host, o.port);
    return 0;
}

int run_report(const Options& o)
{
    std::vector<TimingRow> rows;
    std::vector<std::string> paths = o.bundles;
    if (!o.bundle.empty()) paths.insert(paths.begin(), o.bundle);
    if (paths.empty()) throw ConfigError("report needs at least one bundle");
    for (const auto& path : paths) {
        const SessionBundle b = load_bundle(fs::path(path));
        rows.push_back({b.config.name.empty() ? fs::path(path).stem().string() : b.config.name, b.mesh.num_vertices(),
                        b.mesh.num_faces(), b.timing});
    }
    std::cout << format_timing_table(rows);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Stress-driven diffusion structures"};
    app.require_subcommand(1);
    Options o;

    auto* pre = app.add_subcommand("precompute", "Run the precompute chain and write a bundle");
    pre->add_option("--config", o.config, "Session config JSON")->required()->check(CLI::ExistingFile);
    pre->add_option("--mesh", o.mesh, "Override the config's mesh")->check(CLI::ExistingFile);
    pre->add_option("--out", o.out, "Bundle path");
    pre->add_option("--k", o.k, "Mode count");

    auto add_source = [&](CLI::App* sub) {
        sub->add_option("--bundle", o.bundle, "Precomputed bundle")->check(CLI::ExistingFile);
        sub->add_option("--config", o.config, "Session config JSON (precomputes first)")->check(CLI::ExistingFile);
        sub->add_option("--mesh", o.mesh, "Override the config's mesh")->check(CLI::ExistingFile);
        sub->add_option("--params", o.params, "Stripe parameters JSON")->check(CLI::ExistingFile);
        sub->add_option("--k", o.k, "Mode count");
        sub->add_option("--max-depth", o.max_depth, "Refinement rounds");
    };

    auto* ext = app.add_subcommand("extract", "Extract the structure as OBJ");
    add_source(ext);
    ext->add_option("--out", o.out, "OBJ path");

    auto* sweep = app.add_subcommand("sweep", "Extract structures over a parameter grid");
    add_source(sweep);
    sweep->add_option("--vary", o.vary, "name=v1,v2,... (repeatable)")->required();
    sweep->add_option("--out", o.out, "Output directory");

    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    serve->add_option("--port", o.port, "Port");
    serve->add_option("--host", o.host, "Bind address");

    auto* report = app.add_subcommand("report", "Print stage timings of bundles");
    report->add_option("--bundle", o.bundle, "Bundle")->check(CLI::ExistingFile);
    report->add_option("bundles", o.bundles, "More bundles")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*pre) return run_precompute(o);
        if (*ext) return run_extract(o);
        if (*sweep) return run_sweep(o);
        if (*serve) return run_serve(o);
        if (*report) return run_report(o);
    } catch (const StageError& e) {
        std::cerr << "error in stage " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
