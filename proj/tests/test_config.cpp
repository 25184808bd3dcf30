#include <gtest/gtest.h>

#include "json.hpp"

#include "motormon/config.hpp"
#include "motormon/error.hpp"

using namespace motormon;
using nlohmann::json;

namespace {

json base() {
  return json::parse(R"({
    "duration": 2,
    "seed": 3,
    "channels": [
      {"id": 1, "kind": "VibrationX", "rate": 5000},
      {"id": 4, "kind": "Tachometer", "rate": 1000},
      {"id": 5, "kind": "Temperature", "rate": 10, "filter": {"enabled": true, "r": 0.25}}
    ],
    "profile": {"segments": [{"duration": 2, "rpm": 1800}], "orders": {"all": {"1": 0.3}}},
    "thresholds": [{"channel": 5, "lower": 0, "upper": 80, "hysteresis": 1, "min_violations": 3}],
    "analysis": {"samples_per_rev": 64, "block_revolutions": 8},
    "archive": {"period": 0.01, "store": "x.db"}
  })");
}

// Returns the message of the Config error raised for `j`.
std::string config_error(const json& j) {
  try {
    parse_config(j.dump(), "/tmp");
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::Config) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "config accepted";
  return {};
}

bool mentions(const std::string& msg, const std::string& field) { return msg.find(field) != std::string::npos; }

}  // namespace

TEST(Config, ValidConfigParses) {
  auto cfg = parse_config(base().dump(), "/tmp");
  EXPECT_EQ(cfg.channels.size(), 3u);
  EXPECT_EQ(cfg.channels[2].kind, ChannelKind::Temperature);
  EXPECT_TRUE(cfg.channels[2].filter.enabled);
  EXPECT_DOUBLE_EQ(cfg.channels[2].filter.r, 0.25);
  EXPECT_EQ(cfg.archive.store, std::filesystem::path("/tmp/x.db"));
  EXPECT_EQ(cfg.analysis.watch_orders.size(), 20u);
  EXPECT_EQ(cfg.thresholds[0].mode, ThresholdMode::Samples);
  EXPECT_EQ(cfg.pulses_per_rev(), 1u);
  EXPECT_NE(cfg.channel(4), nullptr);
  EXPECT_EQ(cfg.channel(9), nullptr);
}

TEST(Config, VibrationThresholdDefaultsToRms) {
  auto j = base();
  j["thresholds"].push_back({{"channel", 1}, {"lower", -1}, {"upper", 2}});
  auto cfg = parse_config(j.dump());
  EXPECT_EQ(cfg.thresholds[1].mode, ThresholdMode::FrameRms);
  j["thresholds"][1]["mode"] = "samples";
  EXPECT_EQ(parse_config(j.dump()).thresholds[1].mode, ThresholdMode::Samples);
}

TEST(Config, ErrorsNameTheField) {
  auto j = base();
  j["thresholds"][0]["lower"] = 90;
  auto msg = config_error(j);
  EXPECT_TRUE(mentions(msg, "thresholds[0]")) << msg;

  j = base();
  j["channels"][1]["rate"] = -5;
  msg = config_error(j);
  EXPECT_TRUE(mentions(msg, "channels[1]")) << msg;

  j = base();
  j["channels"][0]["kind"] = "vibrationx";
  msg = config_error(j);
  EXPECT_TRUE(mentions(msg, "channels[0].kind")) << msg;

  j = base();
  j["channels"][0]["rate"] = "fast";
  msg = config_error(j);
  EXPECT_TRUE(mentions(msg, "channels[0].rate")) << msg;

  j = base();
  j["archive"]["period"] = 0;
  EXPECT_TRUE(mentions(config_error(j), "archive.period"));

  j = base();
  j["archive"].erase("store");
  EXPECT_TRUE(mentions(config_error(j), "archive.store"));
}

TEST(Config, UnknownKeysRejected) {
  auto j = base();
  j["chanels"] = json::array();
  EXPECT_TRUE(mentions(config_error(j), "chanels"));
  j = base();
  j["archive"]["perod"] = 0.1;
  EXPECT_TRUE(mentions(config_error(j), "archive.perod"));
}

TEST(Config, StructuralRules) {
  auto j = base();
  j["channels"].push_back({{"id", 1}, {"kind", "Current"}, {"rate", 100}});
  EXPECT_TRUE(mentions(config_error(j), "duplicate"));

  j = base();
  j["thresholds"][0]["channel"] = 42;
  EXPECT_TRUE(mentions(config_error(j), "thresholds[0]"));

  j = base();
  j["replay"] = "r.rec";
  EXPECT_TRUE(mentions(config_error(j), "profile"));

  j = base();
  j["analysis"]["samples_per_rev"] = 48;
  EXPECT_TRUE(mentions(config_error(j), "theta_step"));

  j = base();
  j["analysis"]["watch_orders"] = {40};
  EXPECT_TRUE(mentions(config_error(j), "watch_orders[0]"));

  j = base();
  j["analysis"]["block_revolutions"] = 6;
  EXPECT_TRUE(mentions(config_error(j), "block_revolutions"));

  j = base();
  j["pipeline"] = {{"status_interval", 0.1}};
  EXPECT_TRUE(mentions(config_error(j), "status_interval"));

  j = base();
  j["profile"]["pulses_per_rev"] = 0;
  EXPECT_TRUE(mentions(config_error(j), "pulses_per_rev"));

  j = base();
  j["archive"]["remote"] = "nowhere";
  EXPECT_TRUE(mentions(config_error(j), "archive.remote"));
}

TEST(Config, MalformedJsonAndMissingFile) {
  try {
    parse_config("{\"duration\": ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::Config);
  }
  try {
    load_config("/nonexistent/config.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::Config);
  }
}

TEST(Config, SettingsJsonRoundTrips) {
  auto cfg = parse_config(base().dump());
  auto ch = json::parse(channels_json(cfg.channels));
  ASSERT_EQ(ch.size(), 3u);
  EXPECT_EQ(ch[0]["kind"], "VibrationX");
  EXPECT_EQ(ch[2]["rate"], 10.0);
  auto th = json::parse(thresholds_json(cfg.thresholds));
  EXPECT_EQ(th[0]["min_violations"], 3);
  EXPECT_EQ(th[0]["mode"], "samples");
  EXPECT_TRUE(json::parse(analysis_json(cfg.analysis)).is_object());
}
