#include <catch2/catch_amalgamated.hpp>

#include "support/helpers.hpp"

using namespace chainshort;

TEST_CASE("a new graph holds only the empty initial node") {
  const auto graph = new_graph("t1", "build a calculator");
  REQUIRE(graph.task_id == "t1");
  REQUIRE(graph.nodes.size() == 1);
  REQUIRE(graph.nodes[0].index == 0);
  REQUIRE(graph.nodes[0].content.empty());
  REQUIRE(graph.nodes[0].files.empty());
  REQUIRE(edge_count(graph) == 0);
}

TEST_CASE("a graph needs a task description") {
  REQUIRE_THROWS_AS(new_graph("t1", ""), Error);
}

TEST_CASE("appending steps grows a chain of adjacent edges") {
  auto graph = new_graph("t1", "task");
  const auto first = append_step(graph, "write the draft",
                                 solution_from_content("print(1)", "main.py"),
                                 {2.0, 100});
  const auto second = append_step(graph, "refine it",
                                  solution_from_content("print(2)", "main.py"),
                                  {1.0, 50});
  REQUIRE(first == 1);
  REQUIRE(second == 2);
  REQUIRE(graph.nodes.size() == 3);
  REQUIRE(edge_count(graph) == 2);
  REQUIRE(graph.edges[0].from_index == 0);
  REQUIRE(graph.edges[0].to_index == 1);
  REQUIRE(graph.edges[1].from_index == 1);
  REQUIRE(graph.edges[1].to_index == 2);
  REQUIRE(graph.edges[0].instruction == "write the draft");
  REQUIRE(graph.edges[0].consumption == ResourceDelta{2.0, 100});
  REQUIRE_FALSE(graph.edges[0].shortcut_origin.has_value());
  REQUIRE(final_node(graph).index == 2);
  REQUIRE(final_node(graph).content == "print(2)");
}

TEST_CASE("steps can record the shortcut they realized") {
  auto graph = new_graph("t1", "task");
  ShortcutOrigin origin;
  origin.task_id = "ref";
  origin.from_index = 0;
  origin.to_index = 2;
  append_step(graph, "jump", solution_from_content("print(1)", "main.py"),
              {1.0, 10}, origin);
  REQUIRE(graph.edges[0].shortcut_origin.has_value());
  REQUIRE(graph.edges[0].shortcut_origin->task_id == "ref");
  REQUIRE(graph.edges[0].shortcut_origin->to_index == 2);
}

TEST_CASE("shortcuts copy the task identity and the edge count at call time") {
  auto graph = new_graph("origin-7", "stopwatch app");
  append_step(graph, "a", solution_from_content("x", "main.py"), {1, 1});
  append_step(graph, "b", solution_from_content("y", "main.py"), {1, 1});
  append_step(graph, "c", solution_from_content("z", "main.py"), {1, 1});
  auto& s = add_shortcut(graph, 0, 2, "skip ahead", {3.5, 120});
  REQUIRE(s.origin_task_id == "origin-7");
  REQUIRE(s.origin_task_text == "stopwatch app");
  REQUIRE(s.origin_edge_count == 3);
  REQUIRE(s.consumption == ResourceDelta{3.5, 120});
  REQUIRE_FALSE(s.value.has_value());
  REQUIRE(graph.shortcuts.size() == 1);
  REQUIRE(edge_count(graph) == 3);  // shortcut metadata is not an edge
}

TEST_CASE("shortcut endpoints must point forward to an existing node") {
  auto graph = new_graph("t1", "task");
  append_step(graph, "a", solution_from_content("x", "main.py"), {1, 1});

  try {
    add_shortcut(graph, 1, 1, "noop", {1, 1});
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.code() == Errc::forward_violation);
  }
  try {
    add_shortcut(graph, 1, 0, "backward", {1, 1});
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.code() == Errc::forward_violation);
  }
  try {
    add_shortcut(graph, 0, 5, "dangling", {1, 1});
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.code() == Errc::unknown_node);
  }
  REQUIRE_THROWS_AS(add_shortcut(graph, 0, 1, "bad", {-1.0, 1}), Error);
}

TEST_CASE("file extraction splits FILE blocks and strips hugging fences") {
  const std::string reply =
      "FILE: main.py\n"
      "```\n"
      "print('a')\n"
      "```\n"
      "FILE: util/helper.py\n"
      "def helper():\n"
      "    return 1\n";
  const auto files = extract_files(reply, "main.py");
  REQUIRE(files.size() == 2);
  REQUIRE(files[0].path == "main.py");
  REQUIRE(files[0].body == "print('a')\n");
  REQUIRE(files[1].path == "util/helper.py");
  REQUIRE(files[1].body == "def helper():\n    return 1\n");
}

TEST_CASE("text without FILE markers becomes the default file") {
  const auto files = extract_files("print('inline')", "main.py");
  REQUIRE(files.size() == 1);
  REQUIRE(files[0].path == "main.py");
  REQUIRE(files[0].body == "print('inline')");
}

TEST_CASE("empty or whitespace-only text yields no files") {
  REQUIRE(extract_files("", "main.py").empty());
  REQUIRE(extract_files("  \n\t\n", "main.py").empty());
}

TEST_CASE("a FILE marker without a path falls back to the default name") {
  const auto files = extract_files("FILE:\ncontent\n", "main.py");
  REQUIRE(files.size() == 1);
  REQUIRE(files[0].path == "main.py");
  REQUIRE(files[0].body == "content\n");
}

TEST_CASE("indented fences around a block body are stripped") {
  const std::string reply =
      "FILE: a.py\n"
      "  ```python\n"
      "x = 1\n"
      "  ```\n";
  const auto files = extract_files(reply, "main.py");
  REQUIRE(files.size() == 1);
  REQUIRE(files[0].body == "x = 1\n");
}

TEST_CASE("a lone fence line stays part of the body") {
  const auto files = extract_files("FILE: a.py\n```\n", "main.py");
  REQUIRE(files.size() == 1);
  REQUIRE(files[0].body == "```\n");
}

TEST_CASE("solution_from_content keeps the raw text and the parsed files") {
  const auto solution =
      solution_from_content("FILE: app.py\nprint(3)\n", "main.py");
  REQUIRE(solution.content == "FILE: app.py\nprint(3)\n");
  REQUIRE(solution.files.size() == 1);
  REQUIRE(solution.files[0].path == "app.py");
  REQUIRE_FALSE(solution.embedding.has_value());
  REQUIRE_FALSE(solution.compilable.has_value());
}

TEST_CASE("graphs compare ignoring embeddings") {
  auto a = new_graph("t", "task");
  auto b = new_graph("t", "task");
  append_step(a, "s", solution_from_content("x", "m.py"), {1, 1});
  append_step(b, "s", solution_from_content("x", "m.py"), {1, 1});
  a.nodes[1].embedding = EmbeddingVector{{1.0, 0.0}};
  REQUIRE(a == b);
  b.nodes[1].content = "y";
  REQUIRE_FALSE(a == b);
}
