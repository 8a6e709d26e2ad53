package com.example.basic;

import android.app.Activity;
import android.content.BroadcastReceiver;
import android.content.Context;
import android.content.Intent;
import android.content.IntentFilter;
import android.os.Bundle;
import android.view.View;

public class MainActivity extends Activity implements Runnable {
    private int clicks;

    @Override
    protected void onCreate(Bundle savedInstanceState) {
        super.onCreate(savedInstanceState);
        setContentView(R.layout.activity_main);
        registerReceiver(new BroadcastReceiver() {
            @Override
            public void onReceive(Context context, Intent intent) {
                clicks = 0;
            }
        }, new IntentFilter("com.example.basic.RESET"));
        getFragmentManager().beginTransaction().add(new DetailFragment(), "detail").commit();
        if (savedInstanceState != null) {
            runOnUiThread(this);
        }
    }

    @Override
    protected void onStart() {
        super.onStart();
        clicks = 0;
    }

    @Override
    protected void onStop() {
        super.onStop();
    }

    @Override
    public void run() {
        clicks++;
    }

    public void sendMessage(View view) {
        clicks++;
    }
}
