#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ddlab/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ddlab: dynamical decoupling of a spin-boson system"};
    app.require_subcommand(1);

    ddlab::CommandArgs args;
    struct Entry {
        const char* name;
        const char* help;
        int (*run)(const ddlab::CommandArgs&, std::ostream&, std::ostream&);
    };
    const std::vector<Entry> entries = {
        {"validate", "check a config and the bound hypotheses", ddlab::cmd_validate},
        {"simulate", "propagate and write simulate.json", ddlab::cmd_simulate},
        {"design", "build the control schedule and write schedule.json", ddlab::cmd_design},
        {"verify", "measure the weighted deviation against the bound", ddlab::cmd_verify},
        {"sweep", "sweep T, g or t and fit log-log slopes", ddlab::cmd_sweep},
        {"propcheck", "run the operator and propagator check suites", ddlab::cmd_propcheck},
    };
    std::vector<CLI::App*> subs;
    for (const auto& e : entries) {
        auto* sub = app.add_subcommand(e.name, e.help);
        sub->add_option("config", args.config_path, "YAML config file")->required();
        sub->add_option("--set", args.overrides, "override a config field, path=value")->take_all();
        sub->add_option("--out", args.output_dir, "output directory");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (subs[i]->parsed()) return entries[i].run(args, std::cout, std::cerr);
    return ddlab::exit_failure;
}
