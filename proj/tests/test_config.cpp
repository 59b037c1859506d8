#include <catch2/catch_amalgamated.hpp>

#include "support/helpers.hpp"

#include <cstdlib>
#include <sstream>

using namespace chainshort;

namespace {

Config parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "inline.cfg");
}

std::string error_message(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("the default configuration is self-consistent") {
  const Config config;
  REQUIRE(config.base_url == "http://127.0.0.1:8080/v1");
  REQUIRE(config.credential_env == "CHAINSHORT_API_KEY");
  REQUIRE(config.budget_seconds == 600.0);
  REQUIRE(config.budget_tokens == 100000);
  REQUIRE(config.embedder == "offline");
  REQUIRE_FALSE(config.offline);
  REQUIRE(config.granularity_cap == 300);
  REQUIRE(config.language_name == "python");
  REQUIRE_NOTHROW(validate_config_values(config));
}

TEST_CASE("key=value lines with comments and blanks parse") {
  const auto config = parse(
      "# backend\n"
      "base_url = http://fake.test/v1\n"
      "\n"
      "model=tiny\n"
      "offline = yes\n"
      "budget_seconds = 12.5\n"
      "budget_tokens = 4200\n"
      "utility_floor = -0.25\n"
      "disable_gamma = true\n"
      "reference_k = 3\n"
      "comment_prefixes = #, //\n"
      "sandbox_env_whitelist = HOME ,LANG\n");
  REQUIRE(config.base_url == "http://fake.test/v1");
  REQUIRE(config.model == "tiny");
  REQUIRE(config.offline);
  REQUIRE(config.budget_seconds == 12.5);
  REQUIRE(config.budget_tokens == 4200);
  REQUIRE(config.utility_floor == -0.25);
  REQUIRE(config.disable_gamma);
  REQUIRE_FALSE(config.disable_cost);
  REQUIRE(config.reference_k == 3);
  REQUIRE(config.comment_prefixes == "#, //");
  REQUIRE(config.sandbox_env_whitelist == "HOME ,LANG");
}

TEST_CASE("malformed lines carry the source location") {
  const auto message = error_message("offline = true\nnot a pair\n");
  REQUIRE(message.find("inline.cfg:2") != std::string::npos);
  REQUIRE(message.find("key=value") != std::string::npos);
}

TEST_CASE("unknown keys are rejected, not ignored") {
  const auto message = error_message("bugdet_tokens = 5\n");
  REQUIRE(message.find("unknown key 'bugdet_tokens'") != std::string::npos);
  REQUIRE(message.find("inline.cfg:1") != std::string::npos);
}

TEST_CASE("typed values reject garbage") {
  REQUIRE(error_message("offline = maybe\n").find("boolean") !=
          std::string::npos);
  REQUIRE(error_message("budget_seconds = fast\n").find("real") !=
          std::string::npos);
  REQUIRE(error_message("budget_tokens = 12x\n").find("integer") !=
          std::string::npos);
  REQUIRE(error_message("budget_seconds = inf\n").find("real") !=
          std::string::npos);
}

TEST_CASE("value validation catches semantic nonsense") {
  Config config;
  config.budget_tokens = 0;
  REQUIRE_THROWS_AS(validate_config_values(config), Error);

  config = Config{};
  config.reference_k = 0;
  REQUIRE_THROWS_AS(validate_config_values(config), Error);

  config = Config{};
  config.embedder = "psychic";
  try {
    validate_config_values(config);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.code() == Errc::configuration_error);
    REQUIRE(std::string(e.what()).find("psychic") != std::string::npos);
  }

  config = Config{};
  config.jobs = 0;
  REQUIRE_THROWS_AS(validate_config_values(config), Error);

  config = Config{};
  config.check_command = "";
  REQUIRE_THROWS_AS(validate_config_values(config), Error);
}

TEST_CASE("configs project onto language profiles and run configs") {
  Config config;
  config.language_name = "pseudo";
  config.check_command = "pseudo-run {file}";
  config.check_timeout_seconds = 3.5;
  config.comment_prefixes = "#,//,--";
  config.default_filename = "prog.ps";
  config.sandbox_env_whitelist = "HOME, LANG";
  config.budget_seconds = 42.0;
  config.budget_tokens = 777;
  config.disable_cost = true;
  config.utility_floor = 0.125;
  config.reference_k = 2;
  config.min_reference_sim = 0.6;

  const auto profile = language_profile_from(config);
  REQUIRE(profile.name == "pseudo");
  REQUIRE(profile.check_command_template == "pseudo-run {file}");
  REQUIRE(profile.timeout_seconds == 3.5);
  REQUIRE(profile.comment_prefixes ==
          std::vector<std::string>{"#", "//", "--"});
  REQUIRE(profile.default_filename == "prog.ps");
  REQUIRE(profile.env_whitelist == std::vector<std::string>{"HOME", "LANG"});

  const auto run = run_config_from(config);
  REQUIRE(run.budget_time_seconds == 42.0);
  REQUIRE(run.budget_tokens == 777);
  REQUIRE(run.disable_cost);
  REQUIRE_FALSE(run.disable_selection);
  REQUIRE(run.utility_floor == 0.125);
  REQUIRE(run.reference_k == 2);
  REQUIRE(run.min_reference_sim == 0.6);
  REQUIRE(run.language_profile.name == "pseudo");
}

TEST_CASE("the credential comes from the named environment variable only") {
  Config config;
  config.credential_env = "CHAINSHORT_TEST_CREDENTIAL";
  unsetenv("CHAINSHORT_TEST_CREDENTIAL");
  REQUIRE(load_credential(config).empty());

  setenv("CHAINSHORT_TEST_CREDENTIAL", "sk-sample-123", 1);
  REQUIRE(load_credential(config) == "sk-sample-123");
  unsetenv("CHAINSHORT_TEST_CREDENTIAL");

  config.credential_env = "";
  REQUIRE(load_credential(config).empty());
}
