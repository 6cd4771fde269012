#include <sapflow/cli.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

namespace {

void apply_environment(sapflow::FlowConfig& config)
{
    const sapflow::Execution env = sapflow::Execution::from_environment();
    if (std::getenv("SAPFLOW_THREADS")) config.exec.threads = env.threads;
    if (std::getenv("SAPFLOW_DETERMINISTIC")) config.exec.deterministic = env.deterministic;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"sapflow: area-preserving mean curvature flow of closed surfaces and curves"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Write a generated mesh (OFF/OBJ/CSV by extension, OFF on stdout)");
    sapflow::GeneratorSpec spec;
    std::string gen_out;
    gen->add_option("kind", spec.kind, "icosphere | ellipsoid | perturbed | dumbbell | polygon | ellipse")->required();
    gen->add_option("-o,--output", gen_out, "Output path");
    gen->add_option("--radius", spec.radius);
    gen->add_option("--center", spec.center)->delimiter(',');
    gen->add_option("--subdiv", spec.subdiv);
    gen->add_option("--axes", spec.axes)->delimiter(',');
    gen->add_option("--amplitude", spec.amplitude);
    gen->add_flag("--dent", spec.dent, "Gaussian dent instead of a spherical harmonic");
    gen->add_option("--degree", spec.degree);
    gen->add_option("--order", spec.order);
    gen->add_option("--direction", spec.direction)->delimiter(',');
    gen->add_option("--width", spec.width);
    gen->add_option("--length", spec.length);
    gen->add_option("--neck", spec.neck);
    gen->add_option("--sides", spec.sides, "Polygon sides or ellipse samples");

    // run
    auto* run = app.add_subcommand("run", "Run the flow described by a manifest");
    std::string manifest_path;
    std::vector<std::string> overrides;
    std::string run_out;
    run->add_option("manifest", manifest_path, "Manifest file (key = value lines)")->required();
    run->add_option("-o,--output", run_out, "Output directory (overrides the manifest)");
    run->add_option("--set", overrides, "Override a manifest entry, key=value");

    // analyze
    auto* ana = app.add_subcommand("analyze", "Recompute the run summary from series.csv");
    std::string csv_path;
    std::string ana_out;
    ana->add_option("series", csv_path, "series.csv of a run")->required();
    ana->add_option("-o,--output", ana_out, "Summary JSON path (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    if (*gen) return sapflow::cmd_generate(spec, gen_out);
    if (*ana) return sapflow::cmd_analyze(csv_path, ana_out);

    try {
        sapflow::RunManifest manifest = sapflow::load_manifest(manifest_path);
        apply_environment(manifest.config);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw sapflow::ParseError("--set expects key=value, got '" + kv + "'");
            sapflow::apply_manifest_entry(manifest, sapflow::detail::trim(kv.substr(0, eq)),
                                          sapflow::detail::trim(kv.substr(eq + 1)));
        }
        if (!run_out.empty()) manifest.output = run_out;
        return sapflow::cmd_run(manifest);
    } catch (const sapflow::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return sapflow::exit_input_error;
    }
}
