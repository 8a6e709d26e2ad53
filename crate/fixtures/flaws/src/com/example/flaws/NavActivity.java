package com.example.flaws;

import android.app.Activity;
import android.os.Bundle;
import android.support.design.widget.NavigationView;
import android.view.MenuItem;

public class NavActivity extends Activity implements NavigationView.OnNavigationItemSelectedListener {
    @Override
    protected void onCreate(Bundle savedInstanceState) {
        super.onCreate(savedInstanceState);
        setContentView(R.layout.activity_nav);
        NavigationView navigation = (NavigationView) findViewById(R.id.navigation);
        navigation.setNavigationItemSelectedListener(this);
    }

    @Override
    public boolean onNavigationItemSelected(MenuItem item) {
        setTitle(item.getTitle());
        return true;
    }
}
