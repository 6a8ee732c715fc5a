#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cartwin/sensors.hpp"
#include "cartwin/vehicle.hpp"

using namespace cartwin;

TEST_CASE("score-to-variance map") {
  SUBCASE("printed formula") {
    ScoreMap m{1.0, 2.0, 1.0, 1.0};
    CHECK(lidar_variance(1.0, m) ==
          doctest::Approx(std::tanh(1.0) + 1.0).epsilon(1e-12));
  }
  SUBCASE("transition center reduces to k4") {
    ScoreMap m{2.5, 6.0, 3.0, 0.7};
    CHECK(lidar_variance(2.0, m) == doctest::Approx(0.7));
  }
  SUBCASE("asymptote") {
    ScoreMap m{1.0, 2.0, 1.0, 2.0};
    CHECK(lidar_variance(1e12, m) ==
          doctest::Approx(2.0 - std::tanh(1.0)).epsilon(1e-6));
  }
  SUBCASE("domain") {
    ScoreMap m{1, 1, 1, 1};
    CHECK_THROWS_AS(lidar_variance(0.0, m), std::domain_error);
    CHECK_THROWS_AS(lidar_variance(-2.0, m), std::domain_error);
  }
}

TEST_CASE("derived map hits the nominal variance and the spike ratio") {
  SensorConfig cfg;
  cfg.derive_maps();
  const double nominal = lidar_variance(cfg.score_nominal, cfg.map_x);
  CHECK(nominal ==
        doctest::Approx(cfg.lidar_pos_std * cfg.lidar_pos_std).epsilon(1e-9));
  const double spiked = lidar_variance(cfg.score_on_spike, cfg.map_x);
  CHECK(spiked / nominal > 100.0);
  // positive over the whole jittered range and beyond
  for (double ls = 1.0; ls < 1e4; ls *= 1.3) {
    CHECK(lidar_variance(ls, cfg.map_x) > 0.0);
  }
}

TEST_CASE("variance decreases as the score improves") {
  SensorConfig cfg;
  cfg.derive_maps();
  for (const ScoreMap* m : {&cfg.map_x, &cfg.map_psi}) {
    // never increasing anywhere; tanh saturates flat in floating point
    // for very low scores
    double prev = lidar_variance(0.5, *m);
    for (double ls = 1.0; ls < 500.0; ls += 0.5) {
      const double v = lidar_variance(ls, *m);
      CHECK(v <= prev);
      prev = v;
    }
    // strictly decreasing across the whole operating range of scores
    prev = lidar_variance(30.0, *m);
    for (double ls = 31.0; ls < 300.0; ls += 1.0) {
      const double v = lidar_variance(ls, *m);
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("noiseless configuration passes truth through") {
  SensorConfig cfg;
  cfg.imu_accel_std = cfg.imu_gyro_std = cfg.encoder_std = 0.0;
  cfg.lidar_pos_std = cfg.lidar_heading_std = 0.0;
  cfg.spike_probability = 0.0;
  cfg.derive_maps();
  MotorParams mp;
  SensorSimulator sim(cfg, mp, 42);
  BicycleState truth;
  truth.x = 1.0;
  truth.y = -2.0;
  truth.v = 0.8;
  truth.psi = 0.3;
  truth.r = 0.1;
  const SensorFrame f = sim.sample(truth, 0.25, -0.1, 0);
  CHECK(f.ax == doctest::Approx(0.25));
  CHECK(f.ay == doctest::Approx(-0.1));
  CHECK(f.gyro_r == doctest::Approx(0.1));
  CHECK(wheel_speed(f.encoder_omega, mp) == doctest::Approx(0.8));
  REQUIRE(f.lidar.has_value());
  CHECK(f.lidar->x == doctest::Approx(1.0));
  CHECK(f.lidar->y == doctest::Approx(-2.0));
  CHECK(f.lidar->psi == doctest::Approx(0.3));
}

TEST_CASE("lidar follows the rate schedule") {
  SensorConfig cfg;
  cfg.derive_maps();
  SensorSimulator sim(cfg, MotorParams{}, 1);
  BicycleState truth;
  truth.v = 0.5;
  int lidar_frames = 0;
  for (int tick = 0; tick < 100; ++tick) {
    const SensorFrame f = sim.sample(truth, 0, 0, tick);
    if (tick % 10 == 0) {
      CHECK(f.lidar.has_value());
    } else {
      CHECK_FALSE(f.lidar.has_value());
    }
    lidar_frames += f.lidar.has_value() ? 1 : 0;
  }
  CHECK(lidar_frames == 10);
}

TEST_CASE("forced spikes offset the position and flag the score") {
  SensorConfig cfg;
  cfg.spike_probability = 1.0;
  cfg.derive_maps();
  SensorSimulator sim(cfg, MotorParams{}, 17);
  BicycleState truth;
  truth.x = 3.0;
  truth.y = 1.0;
  truth.v = 0.5;
  for (int tick = 0; tick <= 200; tick += 10) {
    const SensorFrame f = sim.sample(truth, 0, 0, tick);
    REQUIRE(f.lidar.has_value());
    CHECK(f.lidar->spiked);
    CHECK(f.lidar->score == doctest::Approx(cfg.score_on_spike));
    const double offset = std::hypot(f.lidar->x - 3.0, f.lidar->y - 1.0);
    CHECK(offset >= cfg.spike_mag_min);
    CHECK(offset <= cfg.spike_mag_max);
  }
}

TEST_CASE("identical seeds give bitwise-identical streams") {
  SensorConfig cfg;
  cfg.derive_maps();
  SensorSimulator a(cfg, MotorParams{}, 123);
  SensorSimulator b(cfg, MotorParams{}, 123);
  BicycleState truth;
  truth.v = 0.6;
  for (int tick = 0; tick < 50; ++tick) {
    truth.x += 0.01;
    const SensorFrame fa = a.sample(truth, 0.1, 0.2, tick);
    const SensorFrame fb = b.sample(truth, 0.1, 0.2, tick);
    CHECK(fa.ax == fb.ax);
    CHECK(fa.ay == fb.ay);
    CHECK(fa.gyro_r == fb.gyro_r);
    CHECK(fa.encoder_omega == fb.encoder_omega);
    CHECK(fa.lidar.has_value() == fb.lidar.has_value());
    if (fa.lidar) {
      CHECK(fa.lidar->x == fb.lidar->x);
      CHECK(fa.lidar->score == fb.lidar->score);
    }
  }
}

TEST_CASE("sensor config validation") {
  SensorConfig cfg;
  cfg.derive_maps();
  CHECK_NOTHROW(cfg.validate());
  SensorConfig bad = cfg;
  bad.spike_probability = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.score_nominal = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
