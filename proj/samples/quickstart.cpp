// Copyright 2026 The ddidd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Synthesizes twenty minutes of peace plus a four-minute fixed-name flood,
// replays it through the full pipeline and prints what was deployed.

#include <iostream>

#include "ddidd/ddidd.hpp"

int main() {
  using namespace ddidd;

  Scenario s;
  s.legit.n_sources = 1000;
  s.legit.rate_min = 1e-5;
  s.legit.rate_max = 1.0;
  s.legit.duration = 1500;
  s.legit.seed = 42;
  AttackSpec flood;
  flood.kind = AttackKind::p1;
  flood.start = 1200;
  flood.end = 1440;
  flood.seed = 7;
  s.attacks = {flood};
  ScenarioGenerator gen(s);

  // The tables can only look back as far as the peace trace goes.
  EngineConfig cfg;
  cfg.params.ur_learn = cfg.params.ur_use = cfg.params.hc_learn = cfg.params.hc_use = 1200;
  cfg.params.wr_learn = cfg.params.wr_refresh = 1200;

  try {
    Engine engine(cfg);
    auto peace = gen.mix(0, 1200);
    engine.prime(peace);
    auto attack = gen.mix(1200, 1500);
    MetricsReport report = engine.run(attack);

    std::cout << "acceptable load   " << report.acceptable_load << " qps\n"
              << "controlled load   " << report.controlled_load_pct << " %\n"
              << "collateral damage " << report.collateral_damage_pct << " %\n";
    for (const auto& d : report.deployments) {
      std::cout << "t=" << d.ts << " " << d.action << " " << pipeline_string(d.pipeline) << "\n";
    }
    if (engine.last_deployment()) std::cout << "\nrules:\n" << render_neutral(*engine.last_deployment(), cfg.params);
  } catch (const Error& e) {
    std::cerr << "quickstart: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
