package com.example.flaws;

import android.app.Activity;
import android.app.AlertDialog;
import android.content.BroadcastReceiver;
import android.content.Context;
import android.content.DialogInterface;
import android.content.Intent;
import android.content.IntentFilter;
import android.location.LocationManager;
import android.os.Bundle;
import android.telephony.PhoneStateListener;
import android.telephony.TelephonyManager;
import android.util.Log;
import android.view.View;
import java.util.concurrent.ExecutorService;
import java.util.concurrent.Executors;

public class MainActivity extends Activity {
    private final ExecutorService executor = Executors.newSingleThreadExecutor();
    private TelephonyManager telephonyManager;
    private LocationManager locationManager;

    @Override
    protected void onCreate(Bundle savedInstanceState) {
        super.onCreate(savedInstanceState);
        setContentView(R.layout.activity_main);
        registerReceiver(new BroadcastReceiver() {
            @Override
            public void onReceive(Context context, Intent intent) {
                Log.i("flaws", "sync requested");
            }
        }, new IntentFilter("com.example.flaws.SYNC"));
        telephonyManager = (TelephonyManager) getSystemService(Context.TELEPHONY_SERVICE);
        telephonyManager.listen(new PhoneStateListener() {
            @Override
            public void onCallStateChanged(int state, String incomingNumber) {
                Log.i("flaws", "call state " + state);
            }
        }, PhoneStateListener.LISTEN_CALL_STATE);
        locationManager = (LocationManager) getSystemService(Context.LOCATION_SERVICE);
        locationManager.requestLocationUpdates(LocationManager.GPS_PROVIDER, 1000L, 5f, new GpsListener());
        runOnUiThread(new Runnable() {
            @Override
            public void run() {
                setTitle("ready");
            }
        });
        executor.submit(new Runnable() {
            @Override
            public void run() {
                Log.i("flaws", "warming cache");
            }
        });
        new DbHelper(this).getReadableDatabase();
        getFragmentManager().beginTransaction().add(new DetailFragment(), "detail").commit();
    }

    @Override
    protected void onStart() {
        super.onStart();
        new ConfirmDialog().show(getFragmentManager(), "intro");
    }

    @Override
    protected void onStop() {
        super.onStop();
    }

    public void confirm(View view) {
        new AlertDialog.Builder(this)
                .setTitle("Confirm")
                .setPositiveButton("OK", new DialogInterface.OnClickListener() {
                    @Override
                    public void onClick(DialogInterface dialog, int which) {
                        dialog.dismiss();
                    }
                })
                .show();
    }
}
