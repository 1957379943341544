#include <doctest.h>

#include "cellsim/service.hpp"
#include "test_util.hpp"

using namespace cellsim;

namespace {

json episode_request(int n_users = 3, int horizon = 2) {
    Scenario sc = test::single_cell_scenario(n_users);
    return json{{"scenario", scenario_to_json(sc)},
                {"horizon_steps", horizon},
                {"step_seconds", 30.0}};
}

struct ServiceFixture {
    Service service{"127.0.0.1", 0, 2};
    ServiceFixture() { service.start(); }
    ~ServiceFixture() { service.stop(); }
    LineClient connect() { return LineClient("127.0.0.1", service.port()); }
};

}  // namespace

TEST_SUITE("service") {
    TEST_CASE("hello returns a session and the protocol version") {
        ServiceFixture fx;
        LineClient c = fx.connect();
        json r = c.request({{"op", "hello"}});
        CHECK(r["op"] == "hello");
        CHECK(r["protocol_version"] == kProtocolVersion);
        CHECK(r["session_id"].is_string());
        CHECK(!r["session_id"].get<std::string>().empty());
        // second hello on the same connection is an error
        json r2 = c.request({{"op", "hello"}});
        CHECK(r2["op"] == "error");
        CHECK(r2["error"] == "bad_request");
    }

    TEST_CASE("ops before hello are rejected") {
        ServiceFixture fx;
        LineClient c = fx.connect();
        json r = c.request({{"op", "step"}});
        CHECK(r["error"] == "no_session");
    }

    TEST_CASE("step before reset reports no_episode") {
        ServiceFixture fx;
        LineClient c = fx.connect();
        std::string sid = c.request({{"op", "hello"}})["session_id"];
        json r = c.request({{"op", "step"}, {"session_id", sid}});
        CHECK(r["op"] == "error");
        CHECK(r["error"] == "no_episode");
    }

    TEST_CASE("malformed line keeps the connection open") {
        ServiceFixture fx;
        LineClient c = fx.connect();
        json r = c.request(json::parse(R"({"op": 42})"));
        CHECK(r["error"] == "bad_request");
        // raw garbage line
        json r2 = [&] {
            std::string sid;
            json hello = c.request({{"op", "hello"}});
            sid = hello["session_id"];
            return c.request({{"op", "nonsense"}, {"session_id", sid}});
        }();
        CHECK(r2["error"] == "unknown_op");
    }

    TEST_CASE("wrong session id rejected") {
        ServiceFixture fx;
        LineClient c = fx.connect();
        c.request({{"op", "hello"}});
        json r = c.request({{"op", "step"}, {"session_id", "bogus"}});
        CHECK(r["error"] == "bad_session");
    }

    TEST_CASE("reset requires a spec and rejects bad specs") {
        ServiceFixture fx;
        LineClient c = fx.connect();
        std::string sid = c.request({{"op", "hello"}})["session_id"];
        json r = c.request({{"op", "reset"}, {"session_id", sid}});
        CHECK(r["error"] == "bad_request");
        json bad = c.request({{"op", "reset"},
                              {"session_id", sid},
                              {"spec", {{"horizon_steps", 1}}}});
        CHECK(bad["error"] == "bad_spec");
    }

    TEST_CASE("full episode over the wire") {
        ServiceFixture fx;
        LineClient c = fx.connect();
        std::string sid = c.request({{"op", "hello"}})["session_id"];
        json r = c.request({{"op", "reset"}, {"session_id", sid},
                            {"spec", episode_request(3, 2)}});
        CHECK(r["op"] == "reset");
        CHECK(r["observation"]["step"] == 0);

        json s1 = c.request({{"op", "step"}, {"session_id", sid}});
        CHECK(s1["op"] == "step");
        CHECK(s1["done"] == false);
        CHECK(s1["observation"]["step"] == 0);
        CHECK(s1["reward"].is_number());

        json s2 = c.request({{"op", "step"}, {"session_id", sid}, {"action", nullptr}});
        CHECK(s2["done"] == true);
        CHECK(s2["observation"]["step"] == 1);

        json s3 = c.request({{"op", "step"}, {"session_id", sid}});
        CHECK(s3["error"] == "no_episode");

        json cl = c.request({{"op", "close"}, {"session_id", sid}});
        CHECK(cl["op"] == "close");
        json after = c.request({{"op", "step"}, {"session_id", sid}});
        CHECK(after["error"] == "no_session");
    }

    TEST_CASE("invalid action maps to a validation error") {
        ServiceFixture fx;
        LineClient c = fx.connect();
        std::string sid = c.request({{"op", "hello"}})["session_id"];
        c.request({{"op", "reset"}, {"session_id", sid},
                   {"spec", episode_request(2, 3)}});
        Scenario sc = test::single_cell_scenario(2);
        Action a = current_action(sc);
        a["c0"][0].electrical_tilt = 99.0;
        json r = c.request({{"op", "step"}, {"session_id", sid},
                            {"action", action_to_json(a)}});
        CHECK(r["error"] == "validation");
        // episode survives the rejected action
        json r2 = c.request({{"op", "step"}, {"session_id", sid}});
        CHECK(r2["op"] == "step");
    }

    TEST_CASE("session limit returns busy") {
        Service svc("127.0.0.1", 0, 1);
        svc.start();
        {
            LineClient a("127.0.0.1", svc.port());
            json ra = a.request({{"op", "hello"}});
            CHECK(ra["op"] == "hello");
            LineClient b("127.0.0.1", svc.port());
            json rb = b.request({{"op", "hello"}});
            CHECK(rb["op"] == "error");
            CHECK(rb["error"] == "busy");
        }
        svc.stop();
    }

    TEST_CASE("sessions are isolated") {
        ServiceFixture fx;
        LineClient a = fx.connect();
        LineClient b = fx.connect();
        std::string sa = a.request({{"op", "hello"}})["session_id"];
        std::string sb = b.request({{"op", "hello"}})["session_id"];
        CHECK(sa != sb);
        a.request({{"op", "reset"}, {"session_id", sa}, {"spec", episode_request()}});
        // b has no episode even though a reset one
        json r = b.request({{"op", "step"}, {"session_id", sb}});
        CHECK(r["error"] == "no_episode");
        // a's episode still works
        json s = a.request({{"op", "step"}, {"session_id", sa}});
        CHECK(s["op"] == "step");
    }

    TEST_CASE("identical sessions produce identical observations") {
        ServiceFixture fx;
        LineClient a = fx.connect();
        LineClient b = fx.connect();
        std::string sa = a.request({{"op", "hello"}})["session_id"];
        std::string sb = b.request({{"op", "hello"}})["session_id"];
        json spec = episode_request(5, 2);
        json ra = a.request({{"op", "reset"}, {"session_id", sa}, {"spec", spec}});
        json rb = b.request({{"op", "reset"}, {"session_id", sb}, {"spec", spec}});
        CHECK(ra["observation"].dump() == rb["observation"].dump());
        json s1 = a.request({{"op", "step"}, {"session_id", sa}});
        json s2 = b.request({{"op", "step"}, {"session_id", sb}});
        CHECK(s1["observation"].dump() == s2["observation"].dump());
        CHECK(s1["reward"] == s2["reward"]);
    }
}
