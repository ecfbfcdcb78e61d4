#include <stdio.h>
#include <string.h>

#include "escrowsim.h"

static const char *SCRIPT =
    "{\"genesis\": {\"alice\": \"10000000000000000000\", \"provider\": \"1000000000000000000\"},"
    " \"events\": ["
    "  {\"at\": 0, \"actor\": \"alice\", \"action\": \"request_session\", \"session\": \"call\","
    "   \"owner\": \"provider\", \"prefs\": {\"availability_target_bp\": 9980, \"video_quality\": \"hd\","
    "   \"max_period_seconds\": 3600, \"monetization_kind\": \"dynamic_price\"}},"
    "  {\"at\": 15, \"actor\": \"alice\", \"action\": \"pay\", \"session\": \"call\"}]}";

int main(void) {
    EsimSimulator *sim = NULL;
    if (esim_simulator_new(SCRIPT, false, 0, &sim) != ESIM_STATUS_OK) {
        fprintf(stderr, "new: %s\n", esim_last_error_message());
        return 1;
    }
    if (esim_simulator_finish(sim) != ESIM_STATUS_OK) {
        return 2;
    }
    bool ok = false;
    esim_simulator_conservation_ok(sim, &ok);
    char *report = NULL;
    esim_simulator_report_json(sim, &report);
    /* nobody stopped the session, so the alarm clock charged the full price */
    int charged = strstr(report, "\"charge\": \"648000000000000000\"") != NULL;
    esim_string_free(report);
    esim_simulator_free(sim);

    char *charge = NULL, *refund = NULL;
    if (esim_prorate("1000000000000000000", 1000, 3600, &charge, &refund) != ESIM_STATUS_OK) {
        return 3;
    }
    int prorated = strcmp(charge, "277777777777777777") == 0 && strcmp(refund, "722222222222222223") == 0;
    esim_string_free(charge);
    esim_string_free(refund);

    printf("conservation=%d charged=%d prorated=%d\n", ok, charged, prorated);
    return ok && charged && prorated ? 0 : 4;
}
