#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "voxlang/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"language-conditioned scene synthesis, grounding, and placement"};
  app.require_subcommand(1);
  app.fallthrough();

  voxlang::CliOptions o;
  std::string out_dir = "out";
  std::string models_dir = "models";
  app.add_option("--seed", o.seed, "root seed; every substream derives from it")
      ->capture_default_str();
  app.add_option("--out-dir", out_dir, "directory for command outputs")->capture_default_str();
  app.add_option("--models-dir", models_dir, "directory holding model files")
      ->capture_default_str();
  app.add_option("--jobs", o.jobs, "accepted for interface stability; evaluation is serial")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  auto sync = [&] {
    o.out_dir = out_dir;
    o.models_dir = models_dir;
  };

  int rc = 0;

  voxlang::DatasetSpec spec;
  auto* synth = app.add_subcommand("synth", "write a seeded RGB-D dataset to disk");
  synth->add_option("--n-train", spec.n_train, "training scenes")->capture_default_str();
  synth->add_option("--n-test", spec.n_test, "test scenes")->capture_default_str();
  synth->add_option("--cameras", spec.max_cameras, "cap views per scene (0 = full rigs)")
      ->capture_default_str();
  synth->callback([&] {
    sync();
    rc = voxlang::cmd_synth(o, spec);
  });

  int train_scenes = 4500;
  voxlang::TrainConfig cfg;
  auto* train = app.add_subcommand("train", "fit the scorers and save model files");
  train->add_option("--n-scenes", train_scenes, "scenes backing the training pairs")
      ->capture_default_str();
  train->add_option("--lr", cfg.lr, "learning rate")->capture_default_str();
  train->add_option("--epochs", cfg.epochs, "epochs")->capture_default_str();
  train->add_option("--batch", cfg.batch, "minibatch size")->capture_default_str();
  train->add_option("--l2", cfg.l2, "L2 penalty on weights")->capture_default_str();
  train->callback([&] {
    sync();
    rc = voxlang::cmd_train(o, train_scenes, cfg);
  });

  std::string utterance;
  int n_samples = 3;
  double azimuth = 0.0, elevation = 40.0;
  auto* gen = app.add_subcommand("generate", "compose and render scenes for an utterance");
  gen->add_option("utterance", utterance, "scene description")->required();
  gen->add_option("--n", n_samples, "samples to draw")->capture_default_str();
  gen->add_option("--azimuth", azimuth, "render azimuth, degrees")->capture_default_str();
  gen->add_option("--elevation", elevation, "render elevation, degrees")->capture_default_str();
  gen->callback([&] {
    sync();
    rc = voxlang::cmd_generate(o, utterance, n_samples, azimuth, elevation);
  });

  int afford_items = 92, budget = 1000;
  auto* afford = app.add_subcommand("afford", "classify the seeded contradiction set");
  afford->add_option("--n", afford_items, "set size (half affordable)")->capture_default_str();
  afford->add_option("--budget", budget, "sampling budget per item")->capture_default_str();
  afford->callback([&] {
    sync();
    rc = voxlang::cmd_afford(o, afford_items, budget);
  });

  int detect_scenes = 400;
  auto* detect = app.add_subcommand("detect", "referential detection over seeded test scenes");
  detect->add_option("--n-scenes", detect_scenes, "scenes to evaluate")->capture_default_str();
  detect->callback([&] {
    sync();
    rc = voxlang::cmd_detect(o, detect_scenes);
  });

  int follow_seeds = 5;
  bool fit_dynamics = false;
  auto* follow = app.add_subcommand("follow", "placement episodes over the instruction relations");
  follow->add_option("--seeds", follow_seeds, "episodes per relation")->capture_default_str();
  follow->add_flag("--fit-dynamics", fit_dynamics, "plan on dynamics fitted from random rollouts");
  follow->callback([&] {
    sync();
    rc = voxlang::cmd_follow(o, follow_seeds, fit_dynamics);
  });

  int ea_train = 4500, ea_detect = 400, ea_proposals = 500, ea_afford = 92, ea_follow = 5;
  auto* ea = app.add_subcommand("eval-all", "train if needed, then run every suite");
  ea->add_option("--train-scenes", ea_train, "training scenes when models are absent")
      ->capture_default_str();
  ea->add_option("--detect-scenes", ea_detect, "detection scenes")->capture_default_str();
  ea->add_option("--proposal-scenes", ea_proposals, "proposal recall scenes")
      ->capture_default_str();
  ea->add_option("--afford-items", ea_afford, "contradiction set size")->capture_default_str();
  ea->add_option("--follow-seeds", ea_follow, "episodes per relation")->capture_default_str();
  ea->callback([&] {
    sync();
    rc = voxlang::cmd_eval_all(o, ea_train, ea_detect, ea_proposals, ea_afford, ea_follow);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
