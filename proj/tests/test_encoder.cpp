#include <algorithm>

#include "doctest.h"
#include "edgecache/encoder.hpp"
#include "edgecache/serialize.hpp"

using namespace edgecache;

namespace {

Instance sized_instance(int flows, int ars, int ecs, int links, int routers) {
  TopologyParams params;
  params.num_ars = ars;
  params.num_ecs = ecs;
  params.num_links = links;
  params.num_routers = routers;
  return generate_instance(5, generate_topology(5, params), flows);
}

}  // namespace

TEST_CASE("image dimensions follow |K| x (|A|+|E|+|L|)") {
  SUBCASE("10 x 24") {
    const FeatureImage img = encode(sized_instance(10, 8, 7, 9, 2));
    CHECK(img.height == 10);
    CHECK(img.width == 24);
  }
  SUBCASE("5 x 33, the trained input size") {
    const FeatureImage img = encode(sized_instance(5, 7, 6, 20, 5));
    CHECK(img.height == 5);
    CHECK(img.width == 33);
  }
}

TEST_CASE("pixels copy the attach probabilities and utilizations") {
  Instance inst = sized_instance(2, 7, 6, 20, 5);
  inst.flows[0].s_mb = 50.0;
  inst.ec_capacity_mb[0] = 100.0;
  inst.flows[0].b_mbps = 10.0;
  inst.link_capacity_mbps[0] = 50.0;
  const FeatureImage img = encode(inst);
  CHECK(img.at(0, img.q_column(0)) == 0.5);
  CHECK(img.at(0, img.r_column(0)) == 0.2);
  CHECK(img.at(0, 0) == inst.flows[0].p[0]);
  for (double v : img.pixels) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("encode is pure") {
  const Instance inst = sized_instance(5, 7, 6, 20, 5);
  CHECK(encode(inst).pixels == encode(inst).pixels);
}

TEST_CASE("partition splits into height-5 pieces with flagged padding") {
  SUBCASE("20 rows give 4 full sub-images") {
    const auto subs = partition(encode(sized_instance(20, 7, 6, 20, 5)));
    REQUIRE(subs.size() == 4);
    for (const auto& s : subs) {
      CHECK(s.height == 5);
      CHECK(std::none_of(s.padded_rows.begin(), s.padded_rows.end(),
                         [](std::uint8_t p) { return p; }));
    }
  }
  SUBCASE("5 rows stay whole") {
    const auto subs = partition(encode(sized_instance(5, 7, 6, 20, 5)));
    REQUIRE(subs.size() == 1);
    CHECK(subs[0].height == 5);
  }
  SUBCASE("12 rows give 3 pieces, the last padded twice") {
    const auto subs = partition(encode(sized_instance(12, 7, 6, 20, 5)));
    REQUIRE(subs.size() == 3);
    CHECK(subs[2].padded_rows == std::vector<std::uint8_t>{0, 0, 1, 1, 1});
    for (int c = 0; c < subs[2].width; ++c) CHECK(subs[2].at(4, c) == 0.0);
  }
}

TEST_CASE("partition concatenation reproduces the image") {
  const FeatureImage img = encode(sized_instance(13, 7, 6, 20, 5));
  const auto subs = partition(img);
  std::vector<double> glued;
  for (const auto& s : subs) {
    for (int r = 0; r < s.height; ++r) {
      if (s.padded_rows[r]) continue;
      for (int c = 0; c < s.width; ++c) glued.push_back(s.at(r, c));
    }
  }
  CHECK(glued == img.pixels);
}

TEST_CASE("residual update recomputes pressure against leftover capacity") {
  Instance inst = sized_instance(2, 7, 6, 20, 5);
  inst.flows[0].s_mb = 30.0;
  inst.flows[1].s_mb = 20.0;
  inst.ec_capacity_mb[0] = 100.0;
  Assignment prior = Assignment::unassigned(2);
  prior.ec_of_flow[0] = 0;
  const Routing routing = complete_routing(inst, prior);
  const ResidualUpdate upd = apply_assignment_update(inst, prior, routing);
  CHECK(upd.q_at(1, 0) == doctest::Approx(20.0 / 70.0));
  CHECK(upd.excluded_ecs.empty());
}

TEST_CASE("exhausted storage excludes the EC and paints its column") {
  Instance inst = sized_instance(2, 7, 6, 20, 5);
  inst.flows[0].s_mb = 100.0;
  inst.ec_capacity_mb[0] = 100.0;
  Assignment prior = Assignment::unassigned(2);
  prior.ec_of_flow[0] = 0;
  const Routing routing = complete_routing(inst, prior);
  const ResidualUpdate upd = apply_assignment_update(inst, prior, routing);
  REQUIRE(upd.excluded_ecs == std::vector<int>{0});
  for (int k = 0; k < 2; ++k) CHECK(upd.q_at(k, 0) == 1.0);
  const FeatureImage img = encode_with_residuals(inst, upd);
  for (int r = 0; r < img.height; ++r) CHECK(img.at(r, img.q_column(0)) == 1.0);
}

TEST_CASE("residual link pressure above one clamps to the sentinel shade") {
  // c = 50, routed flows consume 45, next flow needs 10: 10/5 = 2 -> 1.0.
  Instance inst;
  inst.topology = Topology::build(2, {{0, 1}}, {0}, {1});
  inst.flows.push_back({10.0, 45.0, {1.0}});
  inst.flows.push_back({10.0, 10.0, {1.0}});
  inst.ec_capacity_mb = {1000.0};
  inst.link_capacity_mbps = {50.0};
  Assignment prior = Assignment::unassigned(2);
  prior.ec_of_flow[0] = 0;
  const ResidualUpdate upd =
      apply_assignment_update(inst, prior, complete_routing(inst, prior));
  CHECK(upd.r_at(1, 0) == 1.0);
  CHECK(upd.excluded_links.empty());
}

TEST_CASE("updated pixels stay inside the unit range") {
  const Instance inst = sized_instance(10, 7, 6, 20, 5);
  Assignment prior = Assignment::unassigned(10);
  for (int k = 0; k < 5; ++k) prior.ec_of_flow[k] = k % inst.topology.num_ecs();
  const ResidualUpdate upd =
      apply_assignment_update(inst, prior, complete_routing(inst, prior));
  const FeatureImage img = encode_with_residuals(inst, upd);
  for (double v : img.pixels) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("PGM bytes follow the P5 header and rounded shades") {
  FeatureImage img;
  img.height = 1;
  img.width = 3;
  img.num_ars = 1;
  img.num_ecs = 1;
  img.num_links = 1;
  img.pixels = {0.0, 0.5, 1.0};
  img.padded_rows = {0};
  const std::vector<std::uint8_t> pgm = to_pgm(img);
  const std::string header(pgm.begin(), pgm.begin() + 9);
  CHECK(header == "P5\n3 1\n25");  // "P5\n3 1\n255\n" prefix
  REQUIRE(pgm.size() == 11 + 3);
  CHECK(pgm[11] == 0);
  CHECK(pgm[12] == 128);  // round(0.5 * 255)
  CHECK(pgm[13] == 255);
}

TEST_CASE("image JSON round-trips exactly") {
  const FeatureImage img = encode(sized_instance(5, 7, 6, 20, 5));
  const std::string text = image_to_json(img);
  const FeatureImage back = image_from_json(text);
  CHECK(back.pixels == img.pixels);
  CHECK(image_to_json(back) == text);
}
